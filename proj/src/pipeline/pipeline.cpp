#include "rttc/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include <spdlog/spdlog.h>

#include "rttc/json_codec.hpp"
#include "rttc/simulated_models.hpp"

namespace rttc::pipeline {

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::Sequential: return "Sequential";
    case Mode::Joint: return "Joint";
    case Mode::VanillaNoAdapt: return "VanillaNoAdapt";
    case Mode::VanillaRag: return "VanillaRag";
    case Mode::VanillaTtt: return "VanillaTtt";
  }
  return "Sequential";
}

Mode mode_from_string(std::string_view name) {
  if (name == "Sequential") return Mode::Sequential;
  if (name == "Joint") return Mode::Joint;
  if (name == "VanillaNoAdapt") return Mode::VanillaNoAdapt;
  if (name == "VanillaRag") return Mode::VanillaRag;
  if (name == "VanillaTtt") return Mode::VanillaTtt;
  throw Error(ErrorCode::ParseError, "unknown pipeline mode '" + std::string(name) + "'");
}

cost::CostMode cost_mode_for(Mode mode) {
  switch (mode) {
    case Mode::Sequential: return cost::CostMode::Rttc;
    case Mode::Joint: return cost::CostMode::RttcJoint;
    case Mode::VanillaNoAdapt: return cost::CostMode::NoAdapt;
    case Mode::VanillaRag: return cost::CostMode::Rag;
    case Mode::VanillaTtt: return cost::CostMode::Ttt;
  }
  return cost::CostMode::Rttc;
}

void validate(const PipelineConfig& cfg) {
  if (cfg.k < 1) throw Error(ErrorCode::ConfigError, "pipeline.k must be at least 1");
  if (!std::isfinite(cfg.tau_r)) throw Error(ErrorCode::ConfigError, "pipeline.tau_r must be finite");
  model::validate(cfg.hyper);
}

std::string augment_context(const RetrievedSet& samples, const Query& query) {
  if (samples.empty()) throw Error(ErrorCode::EmptySampleSet, "nothing to augment with");
  std::string out;
  for (const auto& s : samples.samples) {
    out += model::kAugmentationMarker;
    out += "Q: ";
    out += s.prompt;
    out += "\nA: ";
    out += s.completion;
    out += '\n';
  }
  out += "### Query\n";
  out += query.text;
  return out;
}

namespace {

template <typename T>
T* require(T* dep, const char* role) {
  if (!dep) throw Error(ErrorCode::ConfigError, std::string("pipeline has no ") + role);
  return dep;
}

// Runs one query and records what it spent.
class Run {
 public:
  Run(const Query& query, const PipelineConfig& cfg, const PipelineDeps& deps, Mode mode)
      : query_(query), cfg_(cfg), deps_(deps) {
    validate(query);
    require(deps.generator, "generator");
    if (cfg.qsc_enabled && !deps.cache) {
      throw Error(ErrorCode::ConfigError, "qsc enabled without a cache");
    }
    out_.query_id = query.id;
    out_.domain_hint = query.domain_hint;
    out_.mode = mode;
  }

  // `body` returns true when the stage was served from the cache.
  template <typename F>
  void stage(cost::Stage stage, F&& body) {
    const auto start = std::chrono::steady_clock::now();
    cost::CostEvent e;
    e.bypassed = body();
    e.query_id = query_.id;
    e.stage = stage;
    e.units = e.bypassed ? 0.0 : deps_.cost.price(stage);
    if (cfg_.record_timing) {
      e.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    out_.cost_events.push_back(std::move(e));
  }

  Response base_answer() {
    Response r;
    stage(cost::Stage::BaseInfer, [&] {
      r = deps_.generator->generate(handle(), query_.text);
      return false;
    });
    return r;
  }

  double score(const Query& against, const Response& response) {
    double value = 0.0;
    stage(cost::Stage::RewardEval, [&] {
      value = require(deps_.scorer, "scorer")->score(against, response).value();
      return false;
    });
    return value;
  }

  const RetrievedSet& retrieve() {
    const Embedding& e = embedding();
    auto fetch = [this](const Embedding& key, int k) {
      RetrievedSet set = require(deps_.retriever, "retriever")->retrieve(key, k, query_.id);
      if (set.empty()) throw Error(ErrorCode::EmptyRetrieval, "retrieval returned no samples");
      return set;
    };
    stage(
        cost::Stage::Retrieve,
        [&] {
          if (cfg_.qsc_enabled) {
            auto found = deps_.cache->lookup_or_retrieve(e, cfg_.k, fetch);
            samples_ = std::move(found.value);
            out_.cache_flags.rag_hit = found.hit;
            return found.hit;
          }
          samples_ = fetch(e, cfg_.k);
          out_.cache_flags.rag_hit = false;
          return false;
        });
    for (const auto& s : samples_->samples) {
      out_.retrieved.push_back(RetrievedRef{s.sample_id, s.domain, s.similarity});
    }
    return *samples_;
  }

  Response rag_answer(const RetrievedSet& samples, std::string* context_out = nullptr) {
    Response r;
    stage(cost::Stage::RagInfer, [&] {
      std::string context = augment_context(samples, query_);
      r = deps_.generator->generate(handle(), context);
      if (context_out) *context_out = std::move(context);
      return false;
    });
    return r;
  }

  Response ttt_answer(const RetrievedSet& samples) {
    model::AdapterState adapter;
    auto train = [this](const RetrievedSet& s) {
      return require(deps_.trainer, "trainer")->train(model::ModelHandle{deps_.base_id, std::nullopt}, s, cfg_.hyper);
    };
    stage(
        cost::Stage::TttTrain,
        [&] {
          if (cfg_.qsc_enabled) {
            auto found = deps_.cache->lookup_or_train(embedding(), samples, train);
            adapter = std::move(found.value);
            out_.cache_flags.ttt_hit = found.hit;
            return found.hit;
          }
          adapter = train(samples);
          out_.cache_flags.ttt_hit = false;
          return false;
        });
    // The adapted model's forward pass is part of the training charge.
    return deps_.generator->generate(model::ModelHandle{deps_.base_id, std::move(adapter)},
                                     query_.text);
  }

  Query rag_scoring_query(const std::string& context) const {
    if (!cfg_.score_rag_against_augmented) return query_;
    return Query{query_.id, context, query_.domain_hint};
  }

  RoutingOutcome finish(Strategy strategy, Response final) {
    out_.strategy = strategy;
    out_.final = std::move(final);
    return std::move(out_);
  }

  RoutingOutcome& outcome() { return out_; }

 private:
  model::ModelHandle handle() const { return model::ModelHandle{deps_.base_id, std::nullopt}; }

  const Embedding& embedding() {
    if (!embedding_) embedding_ = require(deps_.embedder, "embedder")->embed(query_.text);
    return *embedding_;
  }

  const Query& query_;
  const PipelineConfig& cfg_;
  const PipelineDeps& deps_;
  RoutingOutcome out_;
  std::optional<Embedding> embedding_;
  std::optional<RetrievedSet> samples_;
};

}  // namespace

RoutingOutcome run_sequential(const Query& query, const PipelineConfig& cfg, const PipelineDeps& deps) {
  Run run(query, cfg, deps, Mode::Sequential);
  Response y0 = run.base_answer();
  const double r0 = run.score(query, y0);
  run.outcome().rewards.r0 = r0;
  if (r0 >= cfg.tau_r) return run.finish(Strategy::NoAdaptation, std::move(y0));

  const RetrievedSet& samples = run.retrieve();
  std::string context;
  Response y_rag = run.rag_answer(samples, &context);
  const double r_rag = run.score(run.rag_scoring_query(context), y_rag);
  run.outcome().rewards.r_rag = r_rag;
  if (r_rag > r0) return run.finish(Strategy::Rag, std::move(y_rag));

  return run.finish(Strategy::Ttt, run.ttt_answer(samples));
}

RoutingOutcome run_joint(const Query& query, const PipelineConfig& cfg, const PipelineDeps& deps) {
  Run run(query, cfg, deps, Mode::Joint);
  Response y0 = run.base_answer();
  const double r0 = run.score(query, y0);
  run.outcome().rewards.r0 = r0;
  if (r0 >= cfg.tau_r) return run.finish(Strategy::NoAdaptation, std::move(y0));

  const RetrievedSet& samples = run.retrieve();
  std::string context;
  Response y_rag = run.rag_answer(samples, &context);
  const double r_rag = run.score(run.rag_scoring_query(context), y_rag);
  Response y_ttt = run.ttt_answer(samples);
  const double r_ttt = run.score(query, y_ttt);
  run.outcome().rewards.r_rag = r_rag;
  run.outcome().rewards.r_ttt = r_ttt;
  if (r_ttt > r_rag) return run.finish(Strategy::Ttt, std::move(y_ttt));
  return run.finish(Strategy::Rag, std::move(y_rag));
}

RoutingOutcome run_baseline(const Query& query, const PipelineConfig& cfg, const PipelineDeps& deps) {
  switch (cfg.mode) {
    case Mode::VanillaNoAdapt: {
      Run run(query, cfg, deps, cfg.mode);
      return run.finish(Strategy::NoAdaptation, run.base_answer());
    }
    case Mode::VanillaRag: {
      // Charged as one base pass plus the augmentation overhead; only the
      // augmented answer is generated.
      Run run(query, cfg, deps, cfg.mode);
      run.stage(cost::Stage::BaseInfer, [] { return false; });
      const RetrievedSet& samples = run.retrieve();
      return run.finish(Strategy::Rag, run.rag_answer(samples));
    }
    case Mode::VanillaTtt: {
      Run run(query, cfg, deps, cfg.mode);
      run.stage(cost::Stage::BaseInfer, [] { return false; });
      const RetrievedSet& samples = run.retrieve();
      return run.finish(Strategy::Ttt, run.ttt_answer(samples));
    }
    default:
      throw Error(ErrorCode::InvalidArgument, "run_baseline needs a Vanilla* mode");
  }
}

RoutingOutcome run_query(const Query& query, const PipelineConfig& cfg, const PipelineDeps& deps) {
  switch (cfg.mode) {
    case Mode::Sequential: return run_sequential(query, cfg, deps);
    case Mode::Joint: return run_joint(query, cfg, deps);
    default: return run_baseline(query, cfg, deps);
  }
}

std::string_view record_query_id(const StreamRecord& record) {
  return std::visit([](const auto& r) -> std::string_view { return r.query_id; }, record);
}

namespace {

StreamRecord run_guarded(const Query& query, const PipelineConfig& cfg, const PipelineDeps& deps) {
  try {
    return run_query(query, cfg, deps);
  } catch (const Error& e) {
    spdlog::warn("query {}: {}", query.id, e.what());
    return QueryError{query.id, e.code(), e.detail()};
  }
}

}  // namespace

std::vector<StreamRecord> run_stream(std::span<const Query> queries, const PipelineConfig& cfg,
                                     const PipelineDeps& deps, std::size_t parallel) {
  if (queries.empty()) throw Error(ErrorCode::EmptyStream, "no queries");
  validate(cfg);
  if (parallel <= 1) {
    std::vector<StreamRecord> out;
    out.reserve(queries.size());
    for (const auto& q : queries) out.push_back(run_guarded(q, cfg, deps));
    return out;
  }
  std::vector<std::optional<StreamRecord>> slots(queries.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < queries.size();) {
      try {
        slots[i] = run_guarded(queries[i], cfg, deps);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < std::min(parallel, queries.size()); ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
  std::vector<StreamRecord> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

std::vector<RoutingOutcome> outcomes_of(std::span<const StreamRecord> records) {
  std::vector<RoutingOutcome> out;
  for (const auto& r : records) {
    if (const auto* o = std::get_if<RoutingOutcome>(&r)) out.push_back(*o);
  }
  return out;
}

std::map<Strategy, double> strategy_distribution(std::span<const RoutingOutcome> outcomes) {
  if (outcomes.empty()) throw Error(ErrorCode::EmptyInput, "no outcomes");
  std::map<Strategy, std::size_t> counts{
      {Strategy::NoAdaptation, 0}, {Strategy::Rag, 0}, {Strategy::Ttt, 0}};
  for (const auto& o : outcomes) ++counts[o.strategy];
  std::map<Strategy, double> out;
  for (const auto& [s, c] : counts) {
    out[s] = static_cast<double>(c) / static_cast<double>(outcomes.size());
  }
  return out;
}

cost::CostLedger accumulate(std::span<const RoutingOutcome> outcomes, const cost::CostParams& p) {
  std::vector<cost::CostEvent> events;
  for (const auto& o : outcomes) events.insert(events.end(), o.cost_events.begin(), o.cost_events.end());
  return cost::accumulate(events, p);
}

RunMetrics compute_metrics(std::span<const StreamRecord> records, const cost::CostParams& p) {
  RunMetrics m;
  m.query_count = records.size();
  const auto outcomes = outcomes_of(records);
  m.error_count = records.size() - outcomes.size();
  if (outcomes.empty()) return m;

  const Mode mode = outcomes.front().mode;
  for (const auto& o : outcomes) {
    if (o.mode != mode) throw Error(ErrorCode::InvalidArgument, "outcomes mix pipeline modes");
  }

  const auto dist = strategy_distribution(outcomes);
  m.strategy_distribution = dist;

  std::vector<qsc::CacheFlags> flags;
  flags.reserve(outcomes.size());
  for (const auto& o : outcomes) flags.push_back(o.cache_flags);
  m.cache_utilization = qsc::cache_utilization(flags);

  std::vector<kb::RetrievalLogEntry> fresh;
  std::map<std::string, std::vector<kb::RetrievalLogEntry>> by_task;
  for (const auto& o : outcomes) {
    if (o.retrieved.empty() || o.cache_flags.rag_hit.value_or(false)) continue;
    kb::RetrievalLogEntry entry;
    entry.query_id = o.query_id;
    entry.k = static_cast<int>(o.retrieved.size());
    for (const auto& r : o.retrieved) entry.returned_domains.push_back(r.domain);
    if (o.domain_hint) by_task[*o.domain_hint].push_back(entry);
    fresh.push_back(std::move(entry));
  }
  if (!fresh.empty()) m.domain_distribution = kb::domain_distribution(fresh);
  for (const auto& [task, log] : by_task) m.domain_distribution_by_task[task] = kb::domain_distribution(log);

  const auto ledger = accumulate(outcomes, p);
  CostReport report;
  report.mode = cost_mode_for(mode);
  report.n = outcomes.size();
  report.d_rag = dist.at(Strategy::Rag);
  report.d_ttt = dist.at(Strategy::Ttt);
  // The closed forms for the fixed-strategy rows do not depend on d.
  const bool routed = mode == Mode::Sequential || mode == Mode::Joint;
  report.totals_by_stage = ledger.totals_by_stage();
  report.reconcile = cost::reconcile(ledger, report.n, p, routed ? report.d_rag : 0.0,
                                     routed ? report.d_ttt : 0.0, report.mode);
  m.cost_report = std::move(report);
  return m;
}

std::vector<SweepRow> sweep_threshold(std::span<const Query> queries, std::span<const double> taus,
                                      const PipelineConfig& cfg, const PipelineDeps& deps,
                                      const qsc::QscConfig& qsc_config) {
  if (taus.empty()) throw Error(ErrorCode::ConfigError, "no thresholds to sweep");
  for (std::size_t i = 0; i < taus.size(); ++i) {
    if (!std::isfinite(taus[i])) throw Error(ErrorCode::ConfigError, "thresholds must be finite");
    if (i > 0 && !(taus[i] > taus[i - 1])) {
      throw Error(ErrorCode::ConfigError, "thresholds must be strictly ascending");
    }
  }
  std::vector<SweepRow> rows;
  for (const double tau : taus) {
    PipelineConfig row_cfg = cfg;
    row_cfg.tau_r = tau;
    PipelineDeps row_deps = deps;
    std::optional<qsc::QueryStateCache> cache;
    if (cfg.qsc_enabled) {
      cache.emplace(qsc_config);
      row_deps.cache = &*cache;
    }
    const auto records = run_stream(queries, row_cfg, row_deps);
    SweepRow row;
    row.tau_r = tau;
    row.metrics = compute_metrics(records, deps.cost);
    if (row.metrics.cost_report) {
      row.mean_cost = row.metrics.cost_report->reconcile.event /
                      static_cast<double>(row.metrics.cost_report->n);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// JSON

using nlohmann::json;

void to_json(json& j, const PipelineConfig& cfg) {
  j = json{{"tau_r", cfg.tau_r},
           {"k", cfg.k},
           {"mode", to_string(cfg.mode)},
           {"hyper", cfg.hyper},
           {"qsc_enabled", cfg.qsc_enabled},
           {"score_rag_against_augmented", cfg.score_rag_against_augmented},
           {"record_timing", cfg.record_timing}};
}

void from_json(const json& j, PipelineConfig& cfg) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "pipeline must be an object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "tau_r") cfg.tau_r = value.get<double>();
      else if (key == "k") {
        if (!value.is_number_integer()) throw Error(ErrorCode::ConfigError, "pipeline.k must be an integer");
        cfg.k = value.get<int>();
      } else if (key == "mode") cfg.mode = mode_from_string(value.get<std::string>());
      else if (key == "hyper") cfg.hyper = value.get<model::TrainHyper>();
      else if (key == "qsc_enabled") cfg.qsc_enabled = value.get<bool>();
      else if (key == "score_rag_against_augmented") cfg.score_rag_against_augmented = value.get<bool>();
      else if (key == "record_timing") cfg.record_timing = value.get<bool>();
      else throw Error(ErrorCode::ConfigError, "unknown key pipeline." + key);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("pipeline: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    throw Error(ErrorCode::ConfigError, e.detail());
  }
}

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_double(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

std::optional<bool> optional_bool(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<bool>();
}

}  // namespace

void to_json(json& j, const RoutingOutcome& o) {
  json rewards = json::object();
  if (o.rewards.r0) rewards["r0"] = *o.rewards.r0;
  if (o.rewards.r_rag) rewards["r_rag"] = *o.rewards.r_rag;
  if (o.rewards.r_ttt) rewards["r_ttt"] = *o.rewards.r_ttt;
  json flags = json::object();
  if (o.cache_flags.rag_hit) flags["rag_hit"] = *o.cache_flags.rag_hit;
  if (o.cache_flags.ttt_hit) flags["ttt_hit"] = *o.cache_flags.ttt_hit;
  json retrieved = json::array();
  for (const auto& r : o.retrieved) {
    retrieved.push_back(json{{"sample_id", r.sample_id}, {"domain", r.domain}, {"similarity", r.similarity}});
  }
  j = json{{"query_id", o.query_id},
           {"domain_hint", o.domain_hint ? json(*o.domain_hint) : json(nullptr)},
           {"mode", to_string(o.mode)},
           {"strategy", to_string(o.strategy)},
           {"final", o.final},
           {"rewards", std::move(rewards)},
           {"cost_events", o.cost_events},
           {"cache_flags", std::move(flags)},
           {"retrieved", std::move(retrieved)}};
}

void from_json(const json& j, RoutingOutcome& o) {
  j.at("query_id").get_to(o.query_id);
  o.domain_hint.reset();
  if (j.contains("domain_hint") && !j.at("domain_hint").is_null()) {
    o.domain_hint = j.at("domain_hint").get<std::string>();
  }
  o.mode = mode_from_string(j.at("mode").get<std::string>());
  o.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  j.at("final").get_to(o.final);
  const auto& rewards = j.at("rewards");
  o.rewards = Rewards{optional_double(rewards, "r0"), optional_double(rewards, "r_rag"),
                      optional_double(rewards, "r_ttt")};
  o.cost_events = j.at("cost_events").get<std::vector<cost::CostEvent>>();
  const auto& flags = j.at("cache_flags");
  o.cache_flags = qsc::CacheFlags{optional_bool(flags, "rag_hit"), optional_bool(flags, "ttt_hit")};
  o.retrieved.clear();
  for (const auto& r : j.at("retrieved")) {
    o.retrieved.push_back(RetrievedRef{r.at("sample_id").get<std::string>(), r.at("domain").get<std::string>(),
                                       r.at("similarity").get<double>()});
  }
}

json to_json(const StreamRecord& record) {
  if (const auto* o = std::get_if<RoutingOutcome>(&record)) return json(*o);
  const auto& e = std::get<QueryError>(record);
  return json{{"query_id", e.query_id},
              {"error", json{{"code", to_string(e.code)}, {"message", e.message}}}};
}

StreamRecord stream_record_from_json(const json& j) {
  try {
    if (!j.is_object()) throw Error(ErrorCode::ParseError, "outcome record must be an object");
    if (j.contains("error")) {
      const auto& e = j.at("error");
      return QueryError{j.at("query_id").get<std::string>(),
                        error_code_from_string(e.at("code").get<std::string>()),
                        e.at("message").get<std::string>()};
    }
    return j.get<RoutingOutcome>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("outcome record: ") + e.what());
  }
}

namespace {

json strategy_map_json(const std::map<Strategy, double>& m) {
  json out = json::object();
  for (const auto& [s, v] : m) out[std::string(to_string(s))] = v;
  return out;
}

}  // namespace

json to_json(const RunMetrics& m) {
  json out{{"query_count", m.query_count}, {"error_count", m.error_count}};
  out["strategy_distribution"] =
      m.strategy_distribution ? strategy_map_json(*m.strategy_distribution) : json(nullptr);
  out["cache_utilization"] = json{{"rag", optional_json(m.cache_utilization.rag)},
                                  {"ttt", optional_json(m.cache_utilization.ttt)}};
  json by_task = json::object();
  for (const auto& [task, dist] : m.domain_distribution_by_task) by_task[task] = dist;
  out["domain_distribution"] =
      json{{"overall", m.domain_distribution ? json(*m.domain_distribution) : json(nullptr)},
           {"by_task", std::move(by_task)}};
  if (m.cost_report) {
    const auto& c = *m.cost_report;
    json totals = json::object();
    for (const auto& [stage, units] : c.totals_by_stage) totals[std::string(cost::to_string(stage))] = units;
    out["cost_report"] = json{{"mode", cost::to_string(c.mode)},
                              {"n", c.n},
                              {"d_rag", c.d_rag},
                              {"d_ttt", c.d_ttt},
                              {"totals_by_stage", std::move(totals)},
                              {"event_total", c.reconcile.event},
                              {"closed_form", c.reconcile.closed},
                              {"delta", c.reconcile.delta}};
  } else {
    out["cost_report"] = nullptr;
  }
  return out;
}

json to_json(const SweepRow& row) {
  return json{{"tau_r", row.tau_r}, {"mean_cost", row.mean_cost}, {"metrics", to_json(row.metrics)}};
}

}  // namespace rttc::pipeline
