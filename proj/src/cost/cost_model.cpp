#include "rttc/cost_model.hpp"

#include <cmath>

#include "rttc/error.hpp"

namespace rttc::cost {

using nlohmann::json;

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::BaseInfer: return "BaseInfer";
    case Stage::RewardEval: return "RewardEval";
    case Stage::Retrieve: return "Retrieve";
    case Stage::RagInfer: return "RagInfer";
    case Stage::TttTrain: return "TttTrain";
  }
  return "BaseInfer";
}

Stage stage_from_string(std::string_view name) {
  if (name == "BaseInfer") return Stage::BaseInfer;
  if (name == "RewardEval") return Stage::RewardEval;
  if (name == "Retrieve") return Stage::Retrieve;
  if (name == "RagInfer") return Stage::RagInfer;
  if (name == "TttTrain") return Stage::TttTrain;
  throw Error(ErrorCode::UnknownStage, "unknown cost stage '" + std::string(name) + "'");
}

double CostParams::price(Stage stage) const {
  switch (stage) {
    case Stage::BaseInfer: return c0;
    case Stage::RewardEval: return c_rew;
    case Stage::Retrieve: return c_ret;
    case Stage::RagInfer: return c_rag;
    case Stage::TttTrain: return c_ttt;
  }
  throw Error(ErrorCode::UnknownStage, "unpriced stage");
}

void validate(const CostParams& p) {
  for (double c : {p.c0, p.c_ret, p.c_rag, p.c_ttt, p.c_rew}) {
    if (!std::isfinite(c) || c < 0.0) {
      throw Error(ErrorCode::ConfigError, "cost constants must be finite and non-negative");
    }
  }
  if (!(p.c_ttt > p.c_rag && p.c_rag > 0.0)) {
    throw Error(ErrorCode::ConfigError, "cost constants must satisfy c_ttt > c_rag > 0");
  }
}

void CostLedger::add(CostEvent event) {
  totals_[event.stage] += event.units;
  events_.push_back(std::move(event));
}

void CostLedger::merge(const CostLedger& other) {
  for (const auto& e : other.events_) add(e);
}

double CostLedger::total() const {
  double sum = 0.0;
  for (const auto& [stage, units] : totals_) sum += units;
  return sum;
}

CostLedger accumulate(std::span<const CostEvent> events, const CostParams& p) {
  CostLedger ledger;
  for (CostEvent e : events) {
    e.units = e.bypassed ? 0.0 : p.price(e.stage);
    ledger.add(std::move(e));
  }
  return ledger;
}

std::string_view to_string(CostMode mode) {
  switch (mode) {
    case CostMode::NoAdapt: return "NoAdapt";
    case CostMode::Rag: return "Rag";
    case CostMode::Ttt: return "Ttt";
    case CostMode::Rttc: return "Rttc";
    case CostMode::RttcJoint: return "RttcJoint";
  }
  return "Rttc";
}

CostMode cost_mode_from_string(std::string_view name) {
  if (name == "NoAdapt") return CostMode::NoAdapt;
  if (name == "Rag") return CostMode::Rag;
  if (name == "Ttt") return CostMode::Ttt;
  if (name == "Rttc") return CostMode::Rttc;
  if (name == "RttcJoint") return CostMode::RttcJoint;
  throw Error(ErrorCode::ParseError, "unknown cost mode '" + std::string(name) + "'");
}

double closed_form(CostMode mode, std::size_t n, const CostParams& p, double d_rag, double d_ttt) {
  // Fractions computed as counts/n can overshoot 1 by an ulp.
  constexpr double kSlack = 1e-12;
  if (!(d_rag >= 0.0) || !(d_ttt >= 0.0) || d_rag + d_ttt > 1.0 + kSlack) {
    throw Error(ErrorCode::InvalidFractions, "need d_rag, d_ttt >= 0 and d_rag + d_ttt <= 1");
  }
  const double N = static_cast<double>(n);
  switch (mode) {
    case CostMode::NoAdapt: return N * p.c0;
    case CostMode::Rag: return N * (p.c0 + p.c_ret + p.c_rag);
    case CostMode::Ttt: return N * (p.c0 + p.c_ret + p.c_ttt);
    case CostMode::Rttc:
      return N * (p.c0 + p.c_rew) + (d_rag + d_ttt) * N * (p.c_ret + p.c_rag + p.c_rew) +
             d_ttt * N * p.c_ttt;
    case CostMode::RttcJoint:
      return N * (p.c0 + p.c_rew) +
             (d_rag + d_ttt) * N * (p.c_ret + p.c_rag + p.c_ttt + 2.0 * p.c_rew);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown cost mode");
}

ReconcileReport reconcile(const CostLedger& ledger, std::size_t n, const CostParams& p,
                          double observed_d_rag, double observed_d_ttt, CostMode mode) {
  ReconcileReport r;
  r.closed = closed_form(mode, n, p, observed_d_rag, observed_d_ttt);
  r.event = ledger.total();
  r.delta = std::abs(r.closed - r.event);
  return r;
}

void to_json(json& j, const CostParams& p) {
  j = json{{"c0", p.c0}, {"c_ret", p.c_ret}, {"c_rag", p.c_rag}, {"c_ttt", p.c_ttt}, {"c_rew", p.c_rew}};
}

void from_json(const json& j, CostParams& p) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "cost params must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!value.is_number()) throw Error(ErrorCode::ConfigError, "cost." + key + " must be a number");
    const double v = value.get<double>();
    if (key == "c0") p.c0 = v;
    else if (key == "c_ret") p.c_ret = v;
    else if (key == "c_rag") p.c_rag = v;
    else if (key == "c_ttt") p.c_ttt = v;
    else if (key == "c_rew") p.c_rew = v;
    else throw Error(ErrorCode::ConfigError, "unknown key cost." + key);
  }
}

void to_json(json& j, const CostEvent& e) {
  j = json{{"query_id", e.query_id}, {"stage", to_string(e.stage)}, {"units", e.units}};
  if (e.wall_seconds) j["wall_seconds"] = *e.wall_seconds;
  if (e.token_count) j["token_count"] = *e.token_count;
  if (e.bypassed) j["bypassed"] = true;
}

void from_json(const json& j, CostEvent& e) {
  j.at("query_id").get_to(e.query_id);
  e.stage = stage_from_string(j.at("stage").get<std::string>());
  j.at("units").get_to(e.units);
  e.wall_seconds.reset();
  e.token_count.reset();
  if (j.contains("wall_seconds")) e.wall_seconds = j.at("wall_seconds").get<double>();
  if (j.contains("token_count")) e.token_count = j.at("token_count").get<std::int64_t>();
  e.bypassed = j.value("bypassed", false);
}

}  // namespace rttc::cost
