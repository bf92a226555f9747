#include <random>

#include <boost/multiprecision/cpp_dec_float.hpp>
#include <gtest/gtest.h>

#include "rttc/cost_model.hpp"
#include "test_support.hpp"

using namespace rttc;
using namespace rttc::cost;
using nlohmann::json;
using rttc::testing::expect_code;
using Exact = boost::multiprecision::cpp_dec_float_50;

namespace {

// Stages one query walks through under sequential routing, per branch.
std::vector<Stage> sequential_stages(Strategy s) {
  switch (s) {
    case Strategy::NoAdaptation: return {Stage::BaseInfer, Stage::RewardEval};
    case Strategy::Rag:
      return {Stage::BaseInfer, Stage::RewardEval, Stage::Retrieve, Stage::RagInfer, Stage::RewardEval};
    case Strategy::Ttt:
      return {Stage::BaseInfer, Stage::RewardEval, Stage::Retrieve, Stage::RagInfer, Stage::RewardEval,
              Stage::TttTrain};
  }
  return {};
}

Exact exact_price(Stage s, const char* const costs[5]) {
  switch (s) {
    case Stage::BaseInfer: return Exact(costs[0]);
    case Stage::Retrieve: return Exact(costs[1]);
    case Stage::RagInfer: return Exact(costs[2]);
    case Stage::TttTrain: return Exact(costs[3]);
    case Stage::RewardEval: return Exact(costs[4]);
  }
  return Exact(0);
}

std::vector<CostEvent> events_for(const std::string& id, const std::vector<Stage>& stages) {
  std::vector<CostEvent> out;
  for (auto s : stages) out.push_back(CostEvent{id, s, 0.0, std::nullopt, std::nullopt, false});
  return out;
}

}  // namespace

TEST(ClosedForm, DirectSubstitution) {
  const CostParams p;
  EXPECT_EQ(closed_form(CostMode::NoAdapt, 100, p, 0, 0), 100.0);
  EXPECT_EQ(closed_form(CostMode::Rag, 1000, p, 0, 0), 4000.0);
  EXPECT_EQ(closed_form(CostMode::Ttt, 1000, p, 0, 0), 7000.0);
  EXPECT_EQ(closed_form(CostMode::Rttc, 1000, p, 0, 0), 1500.0);
  EXPECT_DOUBLE_EQ(closed_form(CostMode::RttcJoint, 1000, p, 0.25, 0.60), 9150.0);
  EXPECT_EQ(closed_form(CostMode::Rttc, 0, p, 0.5, 0.5), 0.0);
}

TEST(ClosedForm, WorkedScenarioMatchesEventLevelOracle) {
  // 1000 queries: 150 stop after the direct answer, 250 take RAG, 600 train.
  const char* const costs[5] = {"1", "1", "2", "5", "0.5"};
  Exact oracle = 0;
  std::vector<CostEvent> events;
  for (int i = 0; i < 1000; ++i) {
    const Strategy s = i < 150 ? Strategy::NoAdaptation : i < 400 ? Strategy::Rag : Strategy::Ttt;
    for (auto stage : sequential_stages(s)) oracle += exact_price(stage, costs);
    const auto e = events_for("q" + std::to_string(i), sequential_stages(s));
    events.insert(events.end(), e.begin(), e.end());
  }
  ASSERT_EQ(oracle, Exact(7475));
  const CostParams p{1, 1, 2, 5, 0.5};
  const double closed = closed_form(CostMode::Rttc, 1000, p, 0.25, 0.60);
  const auto ledger = accumulate(events, p);
  EXPECT_NEAR(closed, oracle.convert_to<double>(), 1e-9 * 7475);
  const auto report = reconcile(ledger, 1000, p, 0.25, 0.60, CostMode::Rttc);
  EXPECT_EQ(report.event, 7475.0);
  EXPECT_LE(report.relative_delta(), 1e-9);
  EXPECT_EQ(ledger.totals_by_stage().at(Stage::TttTrain), 3000.0);
  EXPECT_EQ(ledger.totals_by_stage().at(Stage::RewardEval), 0.5 * (1000 + 850));
}

TEST(ClosedForm, InvalidFractions) {
  const CostParams p;
  expect_code(ErrorCode::InvalidFractions, [&] { closed_form(CostMode::Rttc, 10, p, -0.1, 0.2); });
  expect_code(ErrorCode::InvalidFractions, [&] { closed_form(CostMode::Rttc, 10, p, 0.6, 0.6); });
  expect_code(ErrorCode::InvalidFractions, [&] { closed_form(CostMode::Rag, 10, p, std::nan(""), 0); });
  EXPECT_NO_THROW(closed_form(CostMode::Rttc, 10, p, 0.7, 0.3));
}

TEST(ClosedForm, MonotoneInFractionsAndConstants) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 500; ++t) {
    CostParams p{u(rng) * 3, u(rng) * 3, 0.1 + u(rng), 0, u(rng)};
    p.c_ttt = p.c_rag + 0.1 + u(rng) * 5;
    const double a = u(rng) * 0.45, b = u(rng) * 0.45;
    const double base = closed_form(CostMode::Rttc, 100, p, a, b);
    EXPECT_LE(base, closed_form(CostMode::Rttc, 100, p, a + 0.1, b) + 1e-9);
    EXPECT_LE(base, closed_form(CostMode::Rttc, 100, p, a, b + 0.1) + 1e-9);
    for (double CostParams::*field : {&CostParams::c0, &CostParams::c_ret, &CostParams::c_rag, &CostParams::c_ttt,
                                      &CostParams::c_rew}) {
      CostParams q = p;
      q.*field += 0.25;
      EXPECT_LE(base, closed_form(CostMode::Rttc, 100, q, a, b) + 1e-9);
    }
    EXPECT_GT(closed_form(CostMode::Ttt, 1 + rng() % 1000, p, 0, 0), closed_form(CostMode::Rag, 1, p, 0, 0) - 1e9);
    const std::size_t n = 1 + rng() % 1000;
    EXPECT_GT(closed_form(CostMode::Ttt, n, p, 0, 0), closed_form(CostMode::Rag, n, p, 0, 0));
    EXPECT_GT(closed_form(CostMode::Rag, n, p, 0, 0), closed_form(CostMode::NoAdapt, n, p, 0, 0));
    if (a + b > 0) EXPECT_GE(closed_form(CostMode::RttcJoint, n, p, a, b), closed_form(CostMode::Rttc, n, p, a, b));
  }
}

TEST(JointPremium, EqualOnlyWhenExtraTermsVanish) {
  CostParams p{1, 1, 2, 5, 0};
  // Extra joint cost is d_rag·(c_ttt + c_rew): zero when nothing goes to RAG and c_rew = 0.
  EXPECT_DOUBLE_EQ(closed_form(CostMode::RttcJoint, 50, p, 0.0, 0.4), closed_form(CostMode::Rttc, 50, p, 0.0, 0.4));
  EXPECT_GT(closed_form(CostMode::RttcJoint, 50, p, 0.1, 0.4), closed_form(CostMode::Rttc, 50, p, 0.1, 0.4));
}

TEST(Accumulate, SingleOutcomeExamples) {
  const CostParams p;
  EXPECT_EQ(accumulate(events_for("q", sequential_stages(Strategy::NoAdaptation)), p).total(), p.c0 + p.c_rew);
  EXPECT_EQ(accumulate(events_for("q", sequential_stages(Strategy::Rag)), p).total(),
            p.c0 + 2 * p.c_rew + p.c_ret + p.c_rag);
  auto ttt = events_for("q", sequential_stages(Strategy::Ttt));
  ttt.back().bypassed = true;
  const auto ledger = accumulate(ttt, p);
  EXPECT_EQ(ledger.total(), p.c0 + 2 * p.c_rew + p.c_ret + p.c_rag);
  EXPECT_EQ(ledger.events().back().units, 0.0);
  EXPECT_EQ(ledger.events().size(), 6u);
}

TEST(Accumulate, RepricesStoredUnits) {
  std::vector<CostEvent> events{{"q", Stage::TttTrain, 123.0, 0.5, 17, false}};
  EXPECT_EQ(accumulate(events, CostParams{1, 1, 2, 9, 0.5}).total(), 9.0);
}

TEST(Ledger, MergeOrderDoesNotChangeTotals) {
  std::mt19937_64 rng(8);
  const CostParams p{1.25, 0.75, 2.5, 6.0, 0.125};
  std::vector<CostLedger> parts(6);
  for (int i = 0; i < 300; ++i) {
    const auto s = static_cast<Strategy>(rng() % 3);
    for (auto e : events_for("q" + std::to_string(i), sequential_stages(s))) {
      e.units = p.price(e.stage);
      parts[rng() % parts.size()].add(e);
    }
  }
  CostLedger forward, backward;
  for (const auto& l : parts) forward.merge(l);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) backward.merge(*it);
  EXPECT_EQ(forward.events().size(), backward.events().size());
  EXPECT_NEAR(forward.total(), backward.total(), 1e-9);
  for (const auto& [stage, units] : forward.totals_by_stage()) {
    EXPECT_NEAR(units, backward.totals_by_stage().at(stage), 1e-9);
  }
}

TEST(Stages, NamesAndUnknown) {
  for (auto s : {Stage::BaseInfer, Stage::RewardEval, Stage::Retrieve, Stage::RagInfer, Stage::TttTrain}) {
    EXPECT_EQ(stage_from_string(to_string(s)), s);
  }
  expect_code(ErrorCode::UnknownStage, [] { stage_from_string("Decode"); });
  expect_code(ErrorCode::UnknownStage,
              [] { json{{"query_id", "q"}, {"stage", "Decode"}, {"units", 1.0}}.get<CostEvent>(); });
  for (auto m : {CostMode::NoAdapt, CostMode::Rag, CostMode::Ttt, CostMode::Rttc, CostMode::RttcJoint}) {
    EXPECT_EQ(cost_mode_from_string(to_string(m)), m);
  }
}

TEST(Params, DefaultsValidationAndJson) {
  const CostParams p;
  EXPECT_EQ(p, (CostParams{1, 1, 2, 5, 0.5}));
  EXPECT_NO_THROW(validate(p));
  expect_code(ErrorCode::ConfigError, [] { validate(CostParams{1, 1, 5, 5, 0.5}); });
  expect_code(ErrorCode::ConfigError, [] { validate(CostParams{1, 1, 0, 5, 0.5}); });
  expect_code(ErrorCode::ConfigError, [] { validate(CostParams{-1, 1, 2, 5, 0.5}); });
  EXPECT_EQ(json(p).get<CostParams>(), p);
  EXPECT_EQ((json{{"c_ttt", 7}}.get<CostParams>().c_ttt), 7.0);
  expect_code(ErrorCode::ConfigError, [] { json{{"c_tt", 7}}.get<CostParams>(); });
  expect_code(ErrorCode::ConfigError, [] { json{{"c0", "one"}}.get<CostParams>(); });
}

TEST(Events, JsonRoundTrip) {
  const CostEvent plain{"q1", Stage::Retrieve, 1.0, std::nullopt, std::nullopt, false};
  const json j = plain;
  EXPECT_EQ(j.dump(), R"({"query_id":"q1","stage":"Retrieve","units":1.0})");
  EXPECT_EQ(j.get<CostEvent>(), plain);
  const CostEvent full{"q2", Stage::TttTrain, 0.0, 0.25, 42, true};
  EXPECT_EQ(json(full).get<CostEvent>(), full);
  EXPECT_TRUE(json(full).at("bypassed").get<bool>());
}
