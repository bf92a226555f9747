#pragma once

// Capability interfaces for the four model roles: generator, reward model,
// embedder and test-time trainer. Implementations must be callable
// concurrently; the simulated ones are stateless.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rttc/types.hpp"

namespace rttc::model {

struct TrainHyper {
  int epochs = 2;
  double learning_rate = 5e-5;
  int batch_size = 1;
  int lora_rank = 32;
  int lora_alpha = 16;
  std::vector<std::string> target_layers{"q_proj", "k_proj", "v_proj", "up_proj", "down_proj"};

  bool operator==(const TrainHyper&) const = default;
};

// ConfigError unless every numeric field is positive and target_layers is non-empty.
void validate(const TrainHyper& hyper);

// Opaque fine-tuned state. Weights never leave the backend; the client only
// carries the digest that names them.
struct AdapterState {
  std::string digest;
  std::string base_id;
  std::vector<std::string> trained_on;  // sample ids, sorted
  TrainHyper hyper;

  bool operator==(const AdapterState&) const = default;
};

struct ModelHandle {
  std::string base_id;
  std::optional<AdapterState> adapter;
};

// SHA-256 (hex) over the canonical JSON of the sorted sample ids and the
// hyperparameters. Order of `sample_ids` does not matter.
std::string adapter_digest(std::vector<std::string> sample_ids, const TrainHyper& hyper);

class Generator {
 public:
  virtual ~Generator() = default;
  virtual Response generate(const ModelHandle& handle, std::string_view context) const = 0;
};

class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual RewardScore score(const Query& query, const Response& response) const = 0;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual Embedding embed(std::string_view text) const = 0;
  virtual std::size_t dim() const = 0;
};

class Trainer {
 public:
  virtual ~Trainer() = default;
  // Always adapts the base model: `base.adapter` must be empty.
  virtual AdapterState train(const ModelHandle& base, const RetrievedSet& samples,
                             const TrainHyper& hyper) const = 0;
};

void to_json(nlohmann::json& j, const TrainHyper& h);
void from_json(const nlohmann::json& j, TrainHyper& h);
void to_json(nlohmann::json& j, const AdapterState& a);
void from_json(const nlohmann::json& j, AdapterState& a);

}  // namespace rttc::model
