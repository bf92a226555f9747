#pragma once

// Query-state caching: similarity-gated reuse of retrieved sample sets (RAG
// plane) and trained adapters (TTT plane).
//
// Each plane is a SimilarityCache keyed by query embeddings. A lookup finds
// the most similar key; if that similarity is strictly above tau_e the cached
// value is reused, otherwise the backend is called and the result inserted,
// evicting the least-frequently-used entry (oldest touch on ties) when the
// plane is at its budget. Each plane owns its own key set, so a hit always
// has a value behind it.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rttc/error.hpp"
#include "rttc/model_gateway.hpp"
#include "rttc/types.hpp"

namespace rttc::qsc {

struct QscConfig {
  double tau_e = 0.5;
  std::size_t budget = 8;
  std::string metric = "inner_product";
  std::string eviction = "lfu";
};

// ConfigError on budget 0, non-finite tau_e, or an unsupported metric/eviction id.
void validate(const QscConfig& config);

// Unknown keys are a ConfigError; missing keys keep their defaults.
void from_json(const nlohmann::json& j, QscConfig& c);
void to_json(nlohmann::json& j, const QscConfig& c);

template <typename V>
struct CacheEntry {
  Embedding key;
  V value;
  std::uint64_t freq = 1;
  std::uint64_t last_touch = 0;
};

struct NearestMatch {
  std::size_t index = 0;
  double similarity = 0.0;
};

// Keys closer than this to 1.0 are treated as the same query.
inline constexpr double kDuplicateKeyTolerance = 1e-9;

template <typename V>
class SimilarityCache {
 public:
  explicit SimilarityCache(std::size_t budget) : budget_(budget) {
    if (budget == 0) throw Error(ErrorCode::ConfigError, "cache budget must be at least 1");
  }

  // Entry with the largest inner product to `query`; ties go to the older
  // (smaller last_touch) entry. Empty optional for an empty cache.
  std::optional<NearestMatch> nearest(const Embedding& query) const {
    std::optional<NearestMatch> best;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const double sim = inner_product(entries_[i].key, query);
      if (!best || sim > best->similarity ||
          (sim == best->similarity && entries_[i].last_touch < entries_[best->index].last_touch)) {
        best = NearestMatch{i, sim};
      }
    }
    return best;
  }

  // Records a hit on entry `index` and returns its value.
  const V& hit(std::size_t index, std::uint64_t tick) {
    auto& e = entries_.at(index);
    ++e.freq;
    e.last_touch = tick;
    return e.value;
  }

  // Removes one entry with minimal freq, oldest last_touch among those.
  // Returns the removed keys (empty if the cache is below budget).
  std::vector<Embedding> evict() {
    std::vector<Embedding> removed;
    if (entries_.size() < budget_ || entries_.empty()) return removed;
    std::size_t victim = 0;
    for (std::size_t i = 1; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      const auto& v = entries_[victim];
      if (e.freq < v.freq || (e.freq == v.freq && e.last_touch < v.last_touch)) victim = i;
    }
    removed.push_back(entries_[victim].key);
    entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(victim));
    return removed;
  }

  // Inserts with freq 1, evicting first when at budget. A key that duplicates
  // an existing one replaces that entry's value instead. Returns evicted keys.
  std::vector<Embedding> insert(Embedding key, V value, std::uint64_t tick) {
    if (const auto near = nearest(key);
        near && near->similarity >= 1.0 - kDuplicateKeyTolerance) {
      auto& e = entries_[near->index];
      e.value = std::move(value);
      e.last_touch = tick;
      return {};
    }
    auto removed = evict();
    entries_.push_back(CacheEntry<V>{std::move(key), std::move(value), 1, tick});
    return removed;
  }

  // Used when restoring a dumped state.
  void restore(CacheEntry<V> entry) {
    if (entries_.size() >= budget_) throw Error(ErrorCode::ConfigError, "cache state exceeds budget");
    entries_.push_back(std::move(entry));
  }

  const std::vector<CacheEntry<V>>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t budget() const noexcept { return budget_; }

 private:
  std::size_t budget_;
  std::vector<CacheEntry<V>> entries_;
};

template <typename V>
struct Lookup {
  V value;
  bool hit = false;
  std::optional<double> similarity;  // to the nearest key, when one existed
  std::vector<Embedding> evicted;
};

struct QscState {
  explicit QscState(std::size_t budget) : rag(budget), ttt(budget) {}

  SimilarityCache<RetrievedSet> rag;
  SimilarityCache<model::AdapterState> ttt;
  std::uint64_t tick = 0;
};

using RetrieveFn = std::function<RetrievedSet(const Embedding&, int)>;
using TrainFn = std::function<model::AdapterState(const RetrievedSet&)>;

// RAG plane. On a miss calls `retrieve` once and inserts the result; nothing
// is inserted if it throws.
Lookup<RetrievedSet> lookup_or_retrieve(QscState& state, const QscConfig& config,
                                        const Embedding& query, int k, const RetrieveFn& retrieve);

// TTT plane, mirror of lookup_or_retrieve. `samples` must be non-empty.
Lookup<model::AdapterState> lookup_or_train(QscState& state, const QscConfig& config,
                                            const Embedding& query, const RetrievedSet& samples,
                                            const TrainFn& train);

// Thread-safe owner of a QscState: every lookup (including the backend call
// on a miss) runs under one lock.
class QueryStateCache {
 public:
  explicit QueryStateCache(QscConfig config);

  Lookup<RetrievedSet> lookup_or_retrieve(const Embedding& query, int k, const RetrieveFn& retrieve);
  Lookup<model::AdapterState> lookup_or_train(const Embedding& query, const RetrievedSet& samples,
                                              const TrainFn& train);

  const QscConfig& config() const noexcept { return config_; }
  QscState state() const;
  void replace_state(QscState state);

 private:
  QscConfig config_;
  mutable std::mutex mutex_;
  QscState state_;
};

// qsc-state.json: {"tick", "rag": [{"key", "value", "freq", "last_touch"}], "ttt": [...]}
nlohmann::json dump_state(const QscState& state);
// ConfigError when an entry list exceeds `budget`, ParseError when malformed.
QscState load_state(const nlohmann::json& j, std::size_t budget);

struct CacheFlags {
  std::optional<bool> rag_hit;  // present iff the query entered the RAG stage
  std::optional<bool> ttt_hit;  // present iff the query entered the TTT stage

  bool operator==(const CacheFlags&) const = default;
};

struct CacheUtilization {
  std::optional<double> rag;  // absent when no query entered the stage
  std::optional<double> ttt;
};

// Hits over stage entries, per plane. EmptyInput if `flags` is empty.
CacheUtilization cache_utilization(std::span<const CacheFlags> flags);

}  // namespace rttc::qsc
