#pragma once

// Reward-gated routing between no adaptation, retrieval augmentation and
// test-time training.
//
// Sequential: answer directly; if the reward clears tau_r stop. Otherwise
// retrieve S_k, answer with [S_k; x] and keep that answer if it scores
// strictly higher than the direct one. Otherwise train on the same S_k and
// return the adapted model's answer unscored.
//
// Joint: same first step, then both adapted answers are produced from one S_k,
// both are scored, and the higher reward wins (Rag on ties).
//
// The Vanilla* modes are the fixed-strategy baselines used for cost
// comparison. They never call the scorer.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "rttc/cost_model.hpp"
#include "rttc/error.hpp"
#include "rttc/kb_service.hpp"
#include "rttc/model_gateway.hpp"
#include "rttc/qsc.hpp"
#include "rttc/types.hpp"

namespace rttc::pipeline {

enum class Mode { Sequential, Joint, VanillaNoAdapt, VanillaRag, VanillaTtt };

std::string_view to_string(Mode mode);
Mode mode_from_string(std::string_view name);
cost::CostMode cost_mode_for(Mode mode);

struct PipelineConfig {
  double tau_r = 2.0;
  int k = 4;
  Mode mode = Mode::Sequential;
  model::TrainHyper hyper;
  bool qsc_enabled = false;
  // Score the RAG answer against the augmented input instead of the bare query.
  bool score_rag_against_augmented = false;
  // Fill CostEvent::wall_seconds. Off by default so outputs stay reproducible.
  bool record_timing = false;
};

// ConfigError on k < 1, non-finite tau_r or invalid hyperparameters.
void validate(const PipelineConfig& cfg);

struct Rewards {
  std::optional<double> r0;  // absent only for the Vanilla* baselines
  std::optional<double> r_rag;
  std::optional<double> r_ttt;

  bool operator==(const Rewards&) const = default;
};

// What retrieval handed to the adapted stages, minus the sample text.
struct RetrievedRef {
  std::string sample_id;
  std::string domain;
  double similarity = 0.0;

  bool operator==(const RetrievedRef&) const = default;
};

struct RoutingOutcome {
  std::string query_id;
  std::optional<std::string> domain_hint;
  Mode mode = Mode::Sequential;
  Strategy strategy = Strategy::NoAdaptation;
  Response final;
  Rewards rewards;
  std::vector<cost::CostEvent> cost_events;
  qsc::CacheFlags cache_flags;
  std::vector<RetrievedRef> retrieved;

  bool operator==(const RoutingOutcome&) const = default;
};

struct PipelineDeps {
  const model::Generator* generator = nullptr;
  const model::Scorer* scorer = nullptr;
  const model::Embedder* embedder = nullptr;
  const model::Trainer* trainer = nullptr;
  kb::Retriever* retriever = nullptr;
  qsc::QueryStateCache* cache = nullptr;  // consulted only when cfg.qsc_enabled
  cost::CostParams cost;
  std::string base_id = "base";
};

// "### Example\nQ: <prompt>\nA: <completion>\n" per sample in retrieval
// order, then "### Query\n<text>". EmptySampleSet when `samples` is empty.
std::string augment_context(const RetrievedSet& samples, const Query& query);

RoutingOutcome run_sequential(const Query& query, const PipelineConfig& cfg, const PipelineDeps& deps);
RoutingOutcome run_joint(const Query& query, const PipelineConfig& cfg, const PipelineDeps& deps);
RoutingOutcome run_baseline(const Query& query, const PipelineConfig& cfg, const PipelineDeps& deps);

// Dispatches on cfg.mode.
RoutingOutcome run_query(const Query& query, const PipelineConfig& cfg, const PipelineDeps& deps);

struct QueryError {
  std::string query_id;
  ErrorCode code = ErrorCode::InvalidArgument;
  std::string message;

  bool operator==(const QueryError&) const = default;
};

using StreamRecord = std::variant<RoutingOutcome, QueryError>;

std::string_view record_query_id(const StreamRecord& record);

// Records come back in input order. Errors raised by rttc::Error are caught per
// query; anything else propagates. With `parallel` > 1 queries run on that many
// threads, which is only reproducible when QSC is off.
std::vector<StreamRecord> run_stream(std::span<const Query> queries, const PipelineConfig& cfg,
                                     const PipelineDeps& deps, std::size_t parallel = 1);

std::vector<RoutingOutcome> outcomes_of(std::span<const StreamRecord> records);

// Fraction per strategy; every strategy is present. EmptyInput on no outcomes.
std::map<Strategy, double> strategy_distribution(std::span<const RoutingOutcome> outcomes);

// Re-prices every recorded event from `p`.
cost::CostLedger accumulate(std::span<const RoutingOutcome> outcomes, const cost::CostParams& p);

struct CostReport {
  cost::CostMode mode = cost::CostMode::Rttc;
  std::size_t n = 0;
  double d_rag = 0.0;
  double d_ttt = 0.0;
  std::map<cost::Stage, double> totals_by_stage;
  cost::ReconcileReport reconcile;
};

struct RunMetrics {
  std::size_t query_count = 0;
  std::size_t error_count = 0;
  std::optional<std::map<Strategy, double>> strategy_distribution;
  qsc::CacheUtilization cache_utilization;
  // Over fresh retrievals only; cache hits reuse an earlier query's samples.
  std::optional<std::map<std::string, double>> domain_distribution;
  std::map<std::string, std::map<std::string, double>> domain_distribution_by_task;
  std::optional<CostReport> cost_report;
};

// InvalidArgument when outcomes mix modes.
RunMetrics compute_metrics(std::span<const StreamRecord> records, const cost::CostParams& p);

struct SweepRow {
  double tau_r = 0.0;
  RunMetrics metrics;
  double mean_cost = 0.0;  // event total over successful queries
};

// One stream per tau with everything else fixed. Each row starts from an
// empty cache built from `qsc_config` when cfg.qsc_enabled. ConfigError unless
// `taus` is non-empty, finite and strictly ascending.
std::vector<SweepRow> sweep_threshold(std::span<const Query> queries, std::span<const double> taus,
                                      const PipelineConfig& cfg, const PipelineDeps& deps,
                                      const qsc::QscConfig& qsc_config = {});

void to_json(nlohmann::json& j, const PipelineConfig& cfg);
// Unknown keys are a ConfigError; missing keys keep their defaults.
void from_json(const nlohmann::json& j, PipelineConfig& cfg);
void to_json(nlohmann::json& j, const RoutingOutcome& o);
void from_json(const nlohmann::json& j, RoutingOutcome& o);
nlohmann::json to_json(const StreamRecord& record);
StreamRecord stream_record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunMetrics& m);
nlohmann::json to_json(const SweepRow& row);

}  // namespace rttc::pipeline
