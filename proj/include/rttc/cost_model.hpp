#pragma once

// Cost algebra for N queries under each adaptation strategy, the per-query
// event ledger that realizes it, and the reconciliation between the two.
//
// Closed forms (C0 base inference, C_Ret retrieval, C_RAG / C_TTT adaptation,
// C_Rew reward evaluation; d_RAG / d_TTT routed fractions):
//   NoAdapt    N·C0
//   Rag        N·(C0 + C_Ret + C_RAG)
//   Ttt        N·(C0 + C_Ret + C_TTT)
//   Rttc       N·(C0 + C_Rew) + (d_RAG + d_TTT)·N·(C_Ret + C_RAG + C_Rew) + d_TTT·N·C_TTT
//   RttcJoint  N·(C0 + C_Rew) + (d_RAG + d_TTT)·N·(C_Ret + C_RAG + C_TTT + 2·C_Rew)

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace rttc::cost {

enum class Stage { BaseInfer, RewardEval, Retrieve, RagInfer, TttTrain };

std::string_view to_string(Stage stage);
// UnknownStage for anything else.
Stage stage_from_string(std::string_view name);

struct CostParams {
  double c0 = 1.0;
  double c_ret = 1.0;
  double c_rag = 2.0;
  double c_ttt = 5.0;
  double c_rew = 0.5;

  double price(Stage stage) const;
  bool operator==(const CostParams&) const = default;
};

// ConfigError unless all constants are finite, non-negative and c_ttt > c_rag > 0.
void validate(const CostParams& p);

struct CostEvent {
  std::string query_id;
  Stage stage = Stage::BaseInfer;
  double units = 0.0;
  std::optional<double> wall_seconds;
  std::optional<std::int64_t> token_count;
  bool bypassed = false;  // served from the query-state cache; costs nothing

  bool operator==(const CostEvent&) const = default;
};

class CostLedger {
 public:
  void add(CostEvent event);
  void merge(const CostLedger& other);

  const std::vector<CostEvent>& events() const noexcept { return events_; }
  const std::map<Stage, double>& totals_by_stage() const noexcept { return totals_; }
  double total() const;

 private:
  std::vector<CostEvent> events_;
  std::map<Stage, double> totals_;
};

// Prices every event from `p` (stored units are ignored); bypassed events
// contribute 0.
CostLedger accumulate(std::span<const CostEvent> events, const CostParams& p);

enum class CostMode { NoAdapt, Rag, Ttt, Rttc, RttcJoint };

std::string_view to_string(CostMode mode);
CostMode cost_mode_from_string(std::string_view name);

// InvalidFractions unless d_rag, d_ttt >= 0 and d_rag + d_ttt <= 1.
double closed_form(CostMode mode, std::size_t n, const CostParams& p, double d_rag, double d_ttt);

struct ReconcileReport {
  double closed = 0.0;
  double event = 0.0;
  double delta = 0.0;  // |closed - event|

  double relative_delta() const { return closed == 0.0 ? delta : delta / closed; }
};

ReconcileReport reconcile(const CostLedger& ledger, std::size_t n, const CostParams& p,
                          double observed_d_rag, double observed_d_ttt, CostMode mode);

void to_json(nlohmann::json& j, const CostParams& p);
// Unknown keys are a ConfigError; missing keys keep their defaults.
void from_json(const nlohmann::json& j, CostParams& p);
void to_json(nlohmann::json& j, const CostEvent& e);
void from_json(const nlohmann::json& j, CostEvent& e);

}  // namespace rttc::cost
