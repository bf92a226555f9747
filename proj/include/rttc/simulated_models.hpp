#pragma once

// Deterministic reference backends. They do not model answer quality: the
// generator emits provenance-tagged text, and rewards come from a script so
// tests can force any routing branch.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rttc/model_gateway.hpp"

namespace rttc::model {

// Leading line of every augmented context; the simulated generator uses it to
// recognise RAG inputs.
inline constexpr std::string_view kAugmentationMarker = "### Example\n";

// Generated text looks like "[Rag] answer(<first 48 bytes of the query>)" or
// "[Ttt|<digest>] answer(...)".
class SimulatedGenerator final : public Generator {
 public:
  static constexpr std::size_t kExcerptBytes = 48;

  Response generate(const ModelHandle& handle, std::string_view context) const override;
};

class RewardScript {
 public:
  RewardScript() = default;
  explicit RewardScript(double default_value) : default_(default_value) {}

  RewardScript& set(std::string query_id, ProducedBy produced_by, double value);
  double lookup(std::string_view query_id, ProducedBy produced_by) const;
  double default_value() const noexcept { return default_; }
  std::size_t size() const noexcept { return table_.size(); }

  // {"default": <real>, "entries": [{"query_id","produced_by","value"}, ...]}
  static RewardScript from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

 private:
  std::map<std::pair<std::string, ProducedBy>, double, std::less<>> table_;
  double default_ = 1.0;
};

class SimulatedScorer final : public Scorer {
 public:
  explicit SimulatedScorer(RewardScript script) : script_(std::move(script)) {}

  RewardScore score(const Query& query, const Response& response) const override;
  const RewardScript& script() const noexcept { return script_; }

 private:
  RewardScript script_;
};

// Signed feature hashing of lowercase tokens into `dim` buckets, then
// normalization. Tokens are maximal runs of ASCII letters, digits and
// non-ASCII bytes (so UTF-8 words survive intact); hashing is 64-bit FNV-1a,
// bucket = h % dim, sign = top bit of h.
class FeatureHashEmbedder final : public Embedder {
 public:
  static constexpr std::size_t kDefaultDim = 64;

  explicit FeatureHashEmbedder(std::size_t dim = kDefaultDim);

  Embedding embed(std::string_view text) const override;
  std::size_t dim() const override { return dim_; }

 private:
  std::size_t dim_;
};

class SimulatedTrainer final : public Trainer {
 public:
  AdapterState train(const ModelHandle& base, const RetrievedSet& samples,
                     const TrainHyper& hyper) const override;
};

std::vector<std::string> tokenize(std::string_view text);
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace rttc::model
