#include "rttc/qsc.hpp"

#include <cmath>

#include "rttc/json_codec.hpp"

namespace rttc::qsc {

void validate(const QscConfig& config) {
  if (config.budget == 0) throw Error(ErrorCode::ConfigError, "qsc.budget must be at least 1");
  if (!std::isfinite(config.tau_e)) throw Error(ErrorCode::ConfigError, "qsc.tau_e must be finite");
  if (config.metric != "inner_product") {
    throw Error(ErrorCode::ConfigError, "unsupported qsc.metric '" + config.metric + "'");
  }
  if (config.eviction != "lfu") {
    throw Error(ErrorCode::ConfigError, "unsupported qsc.eviction '" + config.eviction + "'");
  }
}

void from_json(const json& j, QscConfig& c) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "qsc must be an object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "tau_e") c.tau_e = value.get<double>();
      else if (key == "budget") {
        if (!value.is_number_integer() || (!value.is_number_unsigned() && value.get<std::int64_t>() < 0)) {
          throw Error(ErrorCode::ConfigError, "qsc.budget must be a positive integer");
        }
        c.budget = value.get<std::size_t>();
      } else if (key == "metric") c.metric = value.get<std::string>();
      else if (key == "eviction") c.eviction = value.get<std::string>();
      else throw Error(ErrorCode::ConfigError, "unknown key qsc." + key);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("qsc: ") + e.what());
  }
}

void to_json(json& j, const QscConfig& c) {
  j = json{{"tau_e", c.tau_e}, {"budget", c.budget}, {"metric", c.metric}, {"eviction", c.eviction}};
}

namespace {

template <typename V, typename Produce>
Lookup<V> lookup_or_produce(SimilarityCache<V>& cache, std::uint64_t& tick, double tau_e,
                            const Embedding& query, Produce&& produce) {
  const auto near = cache.nearest(query);
  if (near && near->similarity > tau_e) {
    return Lookup<V>{cache.hit(near->index, ++tick), true, near->similarity, {}};
  }
  V fresh = produce();
  Lookup<V> out{fresh, false, near ? std::optional<double>(near->similarity) : std::nullopt, {}};
  out.evicted = cache.insert(query, std::move(fresh), ++tick);
  return out;
}

template <typename V>
json dump_cache(const SimilarityCache<V>& cache) {
  json out = json::array();
  for (const auto& e : cache.entries()) {
    out.push_back(json{{"key", e.key},
                       {"value", e.value},
                       {"freq", e.freq},
                       {"last_touch", e.last_touch}});
  }
  return out;
}

template <typename V>
void load_cache(const json& entries, SimilarityCache<V>& cache) {
  for (const auto& e : entries) {
    CacheEntry<V> entry{e.at("key").get<Embedding>(), e.at("value").get<V>(),
                        e.at("freq").get<std::uint64_t>(), e.at("last_touch").get<std::uint64_t>()};
    if (entry.freq == 0) throw Error(ErrorCode::ParseError, "cache entry freq must be >= 1");
    cache.restore(std::move(entry));
  }
}

}  // namespace

Lookup<RetrievedSet> lookup_or_retrieve(QscState& state, const QscConfig& config,
                                        const Embedding& query, int k, const RetrieveFn& retrieve) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
  return lookup_or_produce(state.rag, state.tick, config.tau_e, query,
                           [&] { return retrieve(query, k); });
}

Lookup<model::AdapterState> lookup_or_train(QscState& state, const QscConfig& config,
                                            const Embedding& query, const RetrievedSet& samples,
                                            const TrainFn& train) {
  if (samples.empty()) throw Error(ErrorCode::EmptySampleSet, "no samples to train on");
  return lookup_or_produce(state.ttt, state.tick, config.tau_e, query,
                           [&] { return train(samples); });
}

QueryStateCache::QueryStateCache(QscConfig config)
    : config_(std::move(config)), state_(config_.budget) {
  validate(config_);
}

Lookup<RetrievedSet> QueryStateCache::lookup_or_retrieve(const Embedding& query, int k,
                                                         const RetrieveFn& retrieve) {
  std::lock_guard lock(mutex_);
  return qsc::lookup_or_retrieve(state_, config_, query, k, retrieve);
}

Lookup<model::AdapterState> QueryStateCache::lookup_or_train(const Embedding& query,
                                                             const RetrievedSet& samples,
                                                             const TrainFn& train) {
  std::lock_guard lock(mutex_);
  return qsc::lookup_or_train(state_, config_, query, samples, train);
}

QscState QueryStateCache::state() const {
  std::lock_guard lock(mutex_);
  return state_;
}

void QueryStateCache::replace_state(QscState state) {
  if (state.rag.budget() != config_.budget || state.ttt.budget() != config_.budget) {
    throw Error(ErrorCode::ConfigError, "cache state budget differs from configuration");
  }
  std::lock_guard lock(mutex_);
  state_ = std::move(state);
}

json dump_state(const QscState& state) {
  return json{{"tick", state.tick}, {"rag", dump_cache(state.rag)}, {"ttt", dump_cache(state.ttt)}};
}

QscState load_state(const json& j, std::size_t budget) {
  QscState state(budget);
  try {
    state.tick = j.at("tick").get<std::uint64_t>();
    load_cache(j.at("rag"), state.rag);
    load_cache(j.at("ttt"), state.ttt);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("qsc state: ") + e.what());
  }
  return state;
}

CacheUtilization cache_utilization(std::span<const CacheFlags> flags) {
  if (flags.empty()) throw Error(ErrorCode::EmptyInput, "no outcomes");
  std::size_t rag_entered = 0, rag_hits = 0, ttt_entered = 0, ttt_hits = 0;
  for (const auto& f : flags) {
    if (f.rag_hit) {
      ++rag_entered;
      rag_hits += *f.rag_hit ? 1 : 0;
    }
    if (f.ttt_hit) {
      ++ttt_entered;
      ttt_hits += *f.ttt_hit ? 1 : 0;
    }
  }
  CacheUtilization out;
  if (rag_entered > 0) out.rag = static_cast<double>(rag_hits) / static_cast<double>(rag_entered);
  if (ttt_entered > 0) out.ttt = static_cast<double>(ttt_hits) / static_cast<double>(ttt_entered);
  return out;
}

}  // namespace rttc::qsc
