#include "rttc/types.hpp"

#include <cmath>
#include <unordered_set>

#include "rttc/error.hpp"

namespace rttc {

namespace {

double squared_norm(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return sum;
}

}  // namespace

void validate(const Query& query) {
  if (query.id.empty()) throw Error(ErrorCode::MalformedRecord, "query id is empty");
  if (query.text.empty()) {
    throw Error(ErrorCode::MalformedRecord, "query '" + query.id + "' has empty text");
  }
}

Embedding normalize(std::span<const double> raw) {
  if (raw.empty()) throw Error(ErrorCode::ZeroVector, "empty vector");
  for (double x : raw) {
    if (!std::isfinite(x)) throw Error(ErrorCode::ZeroVector, "non-finite entry");
  }
  const double norm = std::sqrt(squared_norm(raw));
  if (norm == 0.0 || !std::isfinite(norm)) {
    throw Error(ErrorCode::ZeroVector, "vector has zero norm");
  }
  std::vector<double> out(raw.begin(), raw.end());
  for (double& x : out) x /= norm;
  return Embedding(std::move(out));
}

Embedding Embedding::from_values(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::ZeroVector, "empty vector");
  bool finite = true;
  for (double x : values) finite = finite && std::isfinite(x);
  if (finite && std::abs(std::sqrt(squared_norm(values)) - 1.0) <= kUnitTolerance) {
    return Embedding(std::move(values));
  }
  return normalize(values);
}

double inner_product(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimMismatch, "dim " + std::to_string(a.size()) + " vs " +
                                            std::to_string(b.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

double inner_product(const Embedding& a, const Embedding& b) {
  return inner_product(a.values(), b.values());
}

std::vector<std::string> RetrievedSet::sample_ids() const {
  std::vector<std::string> ids;
  ids.reserve(samples.size());
  for (const auto& s : samples) ids.push_back(s.sample_id);
  return ids;
}

bool is_well_formed(const RetrievedSet& set) {
  if (set.k_requested < 0 || set.samples.size() > static_cast<std::size_t>(set.k_requested)) {
    return false;
  }
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < set.samples.size(); ++i) {
    if (!seen.insert(set.samples[i].sample_id).second) return false;
    if (i > 0 && set.samples[i].similarity > set.samples[i - 1].similarity) return false;
  }
  return true;
}

void validate(const Response& response) {
  const bool is_ttt = response.produced_by == ProducedBy::Ttt;
  if (is_ttt != response.adapter_digest.has_value()) {
    throw Error(ErrorCode::InvalidArgument,
                "adapter_digest must be present exactly when produced_by is Ttt");
  }
}

RewardScore::RewardScore(double value) : value_(value) {
  if (!std::isfinite(value)) throw Error(ErrorCode::NonFiniteReward, "reward is not finite");
}

std::string_view to_string(ProducedBy p) {
  switch (p) {
    case ProducedBy::Direct: return "Direct";
    case ProducedBy::Rag: return "Rag";
    case ProducedBy::Ttt: return "Ttt";
  }
  return "Direct";
}

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::NoAdaptation: return "NoAdaptation";
    case Strategy::Rag: return "Rag";
    case Strategy::Ttt: return "Ttt";
  }
  return "NoAdaptation";
}

ProducedBy produced_by_from_string(std::string_view name) {
  if (name == "Direct") return ProducedBy::Direct;
  if (name == "Rag") return ProducedBy::Rag;
  if (name == "Ttt") return ProducedBy::Ttt;
  throw Error(ErrorCode::ParseError, "unknown produced_by '" + std::string(name) + "'");
}

Strategy strategy_from_string(std::string_view name) {
  if (name == "NoAdaptation") return Strategy::NoAdaptation;
  if (name == "Rag") return Strategy::Rag;
  if (name == "Ttt") return Strategy::Ttt;
  throw Error(ErrorCode::ParseError, "unknown strategy '" + std::string(name) + "'");
}

ProducedBy produced_by_for(Strategy s) {
  switch (s) {
    case Strategy::NoAdaptation: return ProducedBy::Direct;
    case Strategy::Rag: return ProducedBy::Rag;
    case Strategy::Ttt: return ProducedBy::Ttt;
  }
  return ProducedBy::Direct;
}

}  // namespace rttc
