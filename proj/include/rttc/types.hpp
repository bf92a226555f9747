#pragma once

// Shared domain types used by retrieval, caching, routing and cost accounting.
// All of these are plain values: immutable once built and safe to share across threads.

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rttc {

struct Query {
  std::string id;
  std::string text;
  std::optional<std::string> domain_hint;  // ground-truth label, metrics only

  bool operator==(const Query&) const = default;
};

// Throws MalformedRecord when id or text is empty.
void validate(const Query& query);

// Dense unit-norm vector. The only ways to build one are normalize() and
// from_values(); both guarantee a finite, unit-L2 vector of positive dimension.
class Embedding {
 public:
  static constexpr double kUnitTolerance = 1e-9;

  // Keeps `values` bit-for-bit when they are already unit to kUnitTolerance,
  // otherwise normalizes. Used when decoding embeddings from the wire or disk.
  static Embedding from_values(std::vector<double> values);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t dim() const noexcept { return values_.size(); }

  bool operator==(const Embedding&) const = default;

 private:
  explicit Embedding(std::vector<double> values) : values_(std::move(values)) {}
  friend Embedding normalize(std::span<const double> raw);

  std::vector<double> values_;
};

// Scales `raw` to unit L2 norm. ZeroVector if empty, zero-norm or non-finite.
Embedding normalize(std::span<const double> raw);

// Σ a_i·b_i. DimMismatch when the dimensions differ.
double inner_product(const Embedding& a, const Embedding& b);
double inner_product(std::span<const double> a, std::span<const double> b);

struct KnowledgeSample {
  std::string sample_id;
  std::string prompt;
  std::string completion;
  std::string domain;
  Embedding embedding;

  bool operator==(const KnowledgeSample&) const = default;
};

// A knowledge sample as returned by retrieval: the record without its
// embedding, plus the similarity to the query that selected it.
struct RetrievedSample {
  std::string sample_id;
  std::string prompt;
  std::string completion;
  std::string domain;
  double similarity = 0.0;

  bool operator==(const RetrievedSample&) const = default;
};

struct RetrievedSet {
  std::vector<RetrievedSample> samples;  // non-increasing similarity
  int k_requested = 0;

  bool empty() const noexcept { return samples.empty(); }
  std::size_t size() const noexcept { return samples.size(); }
  std::vector<std::string> sample_ids() const;

  bool operator==(const RetrievedSet&) const = default;
};

// Checks ordering, size bound and sample_id uniqueness.
bool is_well_formed(const RetrievedSet& set);

enum class ProducedBy { Direct, Rag, Ttt };

struct Response {
  std::string text;
  ProducedBy produced_by = ProducedBy::Direct;
  std::optional<std::string> adapter_digest;  // present iff produced_by == Ttt

  bool operator==(const Response&) const = default;
};

// Throws InvalidArgument if the adapter_digest/produced_by pairing is broken.
void validate(const Response& response);

class RewardScore {
 public:
  // NonFiniteReward for NaN or infinities.
  explicit RewardScore(double value);

  double value() const noexcept { return value_; }
  auto operator<=>(const RewardScore&) const = default;

 private:
  double value_;
};

enum class Strategy { NoAdaptation, Rag, Ttt };

std::string_view to_string(ProducedBy p);
std::string_view to_string(Strategy s);
ProducedBy produced_by_from_string(std::string_view name);
Strategy strategy_from_string(std::string_view name);

// The response provenance each strategy must produce.
ProducedBy produced_by_for(Strategy s);

}  // namespace rttc
