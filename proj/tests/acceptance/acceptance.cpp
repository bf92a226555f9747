// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "rttc/app.hpp"
#include "rttc/cost_model.hpp"
#include "rttc/kb_service.hpp"
#include "rttc/knowledge_base.hpp"
#include "rttc/pipeline.hpp"
#include "rttc/qsc.hpp"
#include "rttc/simulated_models.hpp"
#include "rttc/synthetic_corpus.hpp"

using namespace rttc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Result()>& check) {
  Result r;
  const auto start = std::chrono::steady_clock::now();
  try {
    r = check();
  } catch (const std::exception& e) {
    r = {false, std::string("threw ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!r.pass) ++failures;
  std::cout << (r.pass ? "PASS " : "FAIL ") << name << ": " << r.detail << fmt::format(" [{:.2f}s]", secs)
            << std::endl;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

class CountingScorer final : public model::Scorer {
 public:
  explicit CountingScorer(const model::Scorer& inner) : inner_(inner) {}
  RewardScore score(const Query& q, const Response& r) const override {
    ++calls;
    return inner_.score(q, r);
  }
  mutable std::atomic<long> calls{0};

 private:
  const model::Scorer& inner_;
};

class RecordingTrainer final : public model::Trainer {
 public:
  model::AdapterState train(const model::ModelHandle& base, const RetrievedSet& samples,
                            const model::TrainHyper& hyper) const override {
    ++calls;
    last = samples.sample_ids();
    return inner_.train(base, samples, hyper);
  }
  mutable long calls = 0;
  mutable std::vector<std::string> last;

 private:
  model::SimulatedTrainer inner_;
};

kb::KnowledgeBase small_base(const model::Embedder& embedder, std::size_t per_domain = 30) {
  kb::SyntheticCorpusSpec spec;
  spec.samples_per_domain = per_domain;
  spec.seed = 5;
  kb::KnowledgeBase base(embedder.dim());
  base.ingest(kb::synthetic_corpus(spec), embedder);
  return base;
}

// Simulated models wired to a small in-process base, scored from `script`.
struct Bench {
  explicit Bench(model::RewardScript script)
      : scorer_impl(std::move(script)), scorer(scorer_impl), service(small_base(embedder)) {}

  pipeline::PipelineDeps deps(qsc::QueryStateCache* cache = nullptr, cost::CostParams p = {}) {
    pipeline::PipelineDeps d;
    d.generator = &generator;
    d.scorer = &scorer;
    d.embedder = &embedder;
    d.trainer = &trainer;
    d.retriever = &service;
    d.cache = cache;
    d.cost = p;
    return d;
  }

  model::SimulatedGenerator generator;
  model::SimulatedScorer scorer_impl;
  CountingScorer scorer;
  model::FeatureHashEmbedder embedder;
  RecordingTrainer trainer;
  kb::KbService service;
};

// Redraws the rare sentence whose hashed features cancel out entirely.
std::string domain_text(std::mt19937_64& rng) {
  static const char* domains[] = {"coding", "math", "medical"};
  static const model::FeatureHashEmbedder embedder;
  for (;;) {
    std::string text = kb::domain_sentence(domains[rng() % 3], 40, 6, rng);
    try {
      embedder.embed(text);
      return text;
    } catch (const Error&) {
    }
  }
}

// Rewards on a coarse grid so that ties against tau_r and between branches occur often.
double grid_reward(std::mt19937_64& rng) { return static_cast<double>(rng() % 9) * 0.5; }

double scripted(const model::RewardScript& s, const std::string& id, ProducedBy p) { return s.lookup(id, p); }

// --- routing --------------------------------------------------------------

Result routing_soundness() {
  constexpr int kCases = 10000;
  std::mt19937_64 rng(1001);
  model::RewardScript script;
  std::vector<Query> queries;
  for (int i = 0; i < kCases; ++i) {
    const std::string id = "q" + std::to_string(i);
    script.set(id, ProducedBy::Direct, grid_reward(rng));
    script.set(id, ProducedBy::Rag, grid_reward(rng));
    script.set(id, ProducedBy::Ttt, grid_reward(rng));
    queries.push_back(Query{id, domain_text(rng), std::nullopt});
  }
  Bench bench(script);
  const auto start = std::chrono::steady_clock::now();
  long violations = 0;
  std::array<long, 3> seq_counts{}, joint_counts{};
  for (const auto mode : {pipeline::Mode::Sequential, pipeline::Mode::Joint}) {
    pipeline::PipelineConfig cfg;
    cfg.mode = mode;
    for (const auto& q : queries) {
      const double r0 = scripted(script, q.id, ProducedBy::Direct);
      const double r_rag = scripted(script, q.id, ProducedBy::Rag);
      const double r_ttt = scripted(script, q.id, ProducedBy::Ttt);
      const long before = bench.scorer.calls;
      const auto o = pipeline::run_query(q, cfg, bench.deps());
      const long calls = bench.scorer.calls - before;
      Strategy expected;
      long expected_calls;
      if (r0 >= cfg.tau_r) {
        expected = Strategy::NoAdaptation;
        expected_calls = 1;
      } else if (mode == pipeline::Mode::Sequential) {
        expected = r_rag > r0 ? Strategy::Rag : Strategy::Ttt;
        expected_calls = 2;
      } else {
        expected = r_ttt > r_rag ? Strategy::Ttt : Strategy::Rag;
        expected_calls = 3;
      }
      bool ok = o.strategy == expected && calls == expected_calls &&
                o.final.produced_by == produced_by_for(o.strategy) && o.rewards.r0 == r0;
      if (mode == pipeline::Mode::Sequential) ok = ok && !o.rewards.r_ttt;
      if (o.strategy == Strategy::Ttt || mode == pipeline::Mode::Joint) {
        if (o.strategy != Strategy::NoAdaptation) {
          std::vector<std::string> ids;
          for (const auto& r : o.retrieved) ids.push_back(r.sample_id);
          ok = ok && ids == bench.trainer.last;
        }
      }
      if (!ok) ++violations;
      auto& counts = mode == pipeline::Mode::Sequential ? seq_counts : joint_counts;
      ++counts[static_cast<int>(o.strategy)];
    }
  }
  const double secs = seconds_since(start);
  return {violations == 0 && secs < 10.0,
          fmt::format("{} violations over {} sequential + {} joint cases in {:.2f}s (limit 10s); "
                      "sequential split {}/{}/{}, joint split {}/{}/{}",
                      violations, kCases, kCases, secs, seq_counts[0], seq_counts[1], seq_counts[2],
                      joint_counts[0], joint_counts[1], joint_counts[2])};
}

Result joint_max_selection() {
  constexpr int kCases = 10000;
  std::mt19937_64 rng(2002);
  model::RewardScript script;
  std::vector<Query> queries;
  for (int i = 0; i < kCases; ++i) {
    const std::string id = "j" + std::to_string(i);
    script.set(id, ProducedBy::Direct, static_cast<double>(rng() % 4) * 0.5);  // always below tau_r
    script.set(id, ProducedBy::Rag, grid_reward(rng));
    script.set(id, ProducedBy::Ttt, grid_reward(rng));
    queries.push_back(Query{id, domain_text(rng), std::nullopt});
  }
  Bench bench(script);
  pipeline::PipelineConfig cfg;
  cfg.mode = pipeline::Mode::Joint;
  long violations = 0, ties = 0;
  for (const auto& q : queries) {
    const auto o = pipeline::run_joint(q, cfg, bench.deps());
    const double r_rag = scripted(script, q.id, ProducedBy::Rag);
    const double r_ttt = scripted(script, q.id, ProducedBy::Ttt);
    const double returned = scripted(script, q.id, o.final.produced_by);
    bool ok = o.strategy != Strategy::NoAdaptation && returned == std::max(r_rag, r_ttt) &&
              o.rewards.r_rag == r_rag && o.rewards.r_ttt == r_ttt;
    if (r_rag == r_ttt) {
      ++ties;
      ok = ok && o.strategy == Strategy::Rag;
    }
    if (!ok) ++violations;
  }
  return {violations == 0, fmt::format("{} violations over {} adapted cases ({} ties)", violations, kCases, ties)};
}

// --- retrieval ------------------------------------------------------------

class TableEmbedder final : public model::Embedder {
 public:
  explicit TableEmbedder(const std::vector<Embedding>& table) : table_(table) {}
  Embedding embed(std::string_view text) const override {
    return table_.at(std::stoul(std::string(text.substr(1))));
  }
  std::size_t dim() const override { return table_.front().dim(); }

 private:
  const std::vector<Embedding>& table_;
};

Result retrieval_exactness() {
  constexpr std::size_t kSamples = 10000, kQueries = 1000, kDim = 64;
  std::mt19937_64 rng(3003);
  std::normal_distribution<double> g;
  auto random_unit = [&] {
    std::vector<double> v(kDim);
    for (auto& x : v) x = g(rng);
    return normalize(v);
  };
  std::vector<Embedding> table;
  std::vector<kb::KnowledgeRecord> records;
  for (std::size_t i = 0; i < kSamples; ++i) {
    table.push_back(random_unit());
    records.push_back({"v" + std::to_string(i), "c", "d" + std::to_string(i % 5)});
  }
  kb::KnowledgeBase base(kDim);
  base.ingest(records, TableEmbedder(table));

  const auto start = std::chrono::steady_clock::now();
  long mismatches = 0;
  std::vector<std::pair<double, std::size_t>> scored(kSamples);
  for (std::size_t t = 0; t < kQueries; ++t) {
    const auto q = random_unit();
    for (std::size_t i = 0; i < kSamples; ++i) {
      double s = 0.0;
      for (std::size_t d = 0; d < kDim; ++d) s += table[i].values()[d] * q.values()[d];
      scored[i] = {s, i};
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (int k : {1, 2, 4, 8, 16}) {
      const auto got = base.retrieve_top_k(q, k);
      bool same = got.size() == static_cast<std::size_t>(k);
      for (std::size_t i = 0; same && i < got.size(); ++i) {
        same = got.samples[i].sample_id == fmt::format("kb-{:06d}", scored[i].second) &&
               got.samples[i].similarity == scored[i].first;
      }
      if (!same) ++mismatches;
    }
  }
  const double secs = seconds_since(start);
  return {mismatches == 0 && secs < 60.0,
          fmt::format("{} mismatches over {} queries x k in {{1,2,4,8,16}}, {} samples, dim {}, {:.2f}s (limit 60s)",
                      mismatches, kQueries, kSamples, kDim, secs)};
}

// --- query-state cache ----------------------------------------------------

Result qsc_contract() {
  constexpr int kOps = 6000;
  std::mt19937_64 rng(4004);
  std::normal_distribution<double> g;
  qsc::QscConfig config;  // tau_e 0.5, budget 8
  qsc::QscState state(config.budget);

  std::vector<std::vector<double>> anchors;
  for (int i = 0; i < 24; ++i) {
    std::vector<double> v(6);
    for (auto& x : v) x = g(rng);
    anchors.push_back(v);
  }
  long size_violations = 0, hit_violations = 0, call_violations = 0, lfu_violations = 0, dup_violations = 0;
  long hits = 0, misses = 0, evictions = 0, duplicates = 0;
  long retrieve_calls = 0, train_calls = 0, rag_misses = 0, ttt_misses = 0;
  std::optional<Embedding> previous[2];

  auto check_plane = [&](auto& cache, bool is_rag, const Embedding& q, auto&& lookup) {
    struct Snap {
      Embedding key;
      std::uint64_t freq;
    };
    std::vector<Snap> before;
    double max_sim = -2.0;
    for (const auto& e : cache.entries()) {
      before.push_back({e.key, e.freq});
      max_sim = std::max(max_sim, inner_product(e.key, q));
    }
    const bool duplicate = previous[is_rag ? 0 : 1] && *previous[is_rag ? 0 : 1] == q;
    const auto result = lookup();
    const bool expect_hit = !before.empty() && max_sim > config.tau_e;
    if (result.hit != expect_hit) ++hit_violations;
    if (duplicate) {
      ++duplicates;
      if (!result.hit) ++dup_violations;
    }
    if (result.hit) {
      ++hits;
      // Returned value must be the stored one, bit for bit.
      bool found = false;
      for (const auto& e : cache.entries()) found = found || e.value == result.value;
      if (!found) ++hit_violations;
    } else {
      ++misses;
      (is_rag ? rag_misses : ttt_misses) += 1;
    }
    for (const auto& removed : result.evicted) {
      ++evictions;
      std::uint64_t removed_freq = 0;
      for (const auto& s : before) {
        if (s.key == removed) removed_freq = s.freq;
      }
      for (const auto& e : cache.entries()) {
        for (const auto& s : before) {
          if (s.key == e.key && s.freq < removed_freq) ++lfu_violations;
        }
      }
    }
    if (cache.size() > config.budget) ++size_violations;
    previous[is_rag ? 0 : 1] = q;
  };

  Embedding last = normalize(anchors[0]);
  for (int op = 0; op < kOps; ++op) {
    Embedding q = last;
    if (rng() % 5 != 0) {
      auto v = anchors[rng() % anchors.size()];
      for (auto& x : v) x += 0.6 * g(rng);
      q = normalize(v);
    }
    last = q;
    const int id = op;
    if (rng() % 2 == 0) {
      check_plane(state.rag, true, q, [&] {
        return qsc::lookup_or_retrieve(state, config, q, 4, [&](const Embedding&, int k) {
          ++retrieve_calls;
          return RetrievedSet{{{"s" + std::to_string(id), "p", "c", "d", 1.0}}, k};
        });
      });
    } else {
      const RetrievedSet samples{{{"s" + std::to_string(id), "p", "c", "d", 1.0}}, 1};
      check_plane(state.ttt, false, q, [&] {
        return qsc::lookup_or_train(state, config, q, samples, [&](const RetrievedSet& s) {
          ++train_calls;
          return model::AdapterState{"d" + std::to_string(id), "base", s.sample_ids(), {}};
        });
      });
    }
  }
  if (retrieve_calls != rag_misses || train_calls != ttt_misses) ++call_violations;
  const long total = size_violations + hit_violations + call_violations + lfu_violations + dup_violations;
  return {total == 0,
          fmt::format("{} ops ({} hits, {} misses, {} evictions, {} consecutive duplicates); violations: "
                      "size {}, hit {}, calls {}, lfu {}, duplicate {}",
                      kOps, hits, misses, evictions, duplicates, size_violations, hit_violations,
                      call_violations, lfu_violations, dup_violations)};
}

Result qsc_transparency() {
  // Greedily keep texts whose embedding is at most tau_e similar to every kept one.
  const model::FeatureHashEmbedder embedder;
  std::mt19937_64 rng(5005);
  std::vector<Query> stream;
  std::vector<Embedding> kept;
  for (int attempt = 0; attempt < 5000 && stream.size() < 60; ++attempt) {
    const std::string text = domain_text(rng);
    const auto e = embedder.embed(text);
    bool ok = true;
    for (const auto& k : kept) ok = ok && inner_product(k, e) <= 0.5;
    if (!ok) continue;
    kept.push_back(e);
    stream.push_back(Query{"t" + std::to_string(stream.size()), text, std::nullopt});
  }
  double max_pair = -1.0;
  for (std::size_t i = 0; i < kept.size(); ++i)
    for (std::size_t j = i + 1; j < kept.size(); ++j) max_pair = std::max(max_pair, inner_product(kept[i], kept[j]));

  model::RewardScript script;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    script.set(stream[i].id, ProducedBy::Direct, static_cast<double>(i % 3));
    script.set(stream[i].id, ProducedBy::Rag, static_cast<double>(i % 2));
  }
  bool identical = true;
  for (const auto mode : {pipeline::Mode::Sequential, pipeline::Mode::Joint}) {
    pipeline::PipelineConfig cfg;
    cfg.mode = mode;
    Bench off_bench(script), on_bench(script);
    const auto off = pipeline::run_stream(stream, cfg, off_bench.deps());
    qsc::QueryStateCache cache{qsc::QscConfig{}};
    cfg.qsc_enabled = true;
    const auto on = pipeline::run_stream(stream, cfg, on_bench.deps(&cache));
    identical = identical && app::render_outcomes(off) == app::render_outcomes(on) &&
                app::render_metrics(pipeline::compute_metrics(off, {})) ==
                    app::render_metrics(pipeline::compute_metrics(on, {}));
  }
  return {identical && stream.size() >= 30 && max_pair <= 0.5,
          fmt::format("{} queries, max pairwise similarity {:.3f}; outcomes and metrics {} with QSC on vs off",
                      stream.size(), max_pair, identical ? "byte-identical" : "DIFFER")};
}

// --- cost model -----------------------------------------------------------

Result cost_reconciliation() {
  std::mt19937_64 rng(6006);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::pair<cost::CostMode, pipeline::Mode> modes[] = {
      {cost::CostMode::NoAdapt, pipeline::Mode::VanillaNoAdapt},
      {cost::CostMode::Rag, pipeline::Mode::VanillaRag},
      {cost::CostMode::Ttt, pipeline::Mode::VanillaTtt},
      {cost::CostMode::Rttc, pipeline::Mode::Sequential},
      {cost::CostMode::RttcJoint, pipeline::Mode::Joint}};
  long failures_seen = 0, scenarios = 0;
  double worst = 0.0;
  for (const auto& [cost_mode, mode] : modes) {
    for (int s = 0; s < 100; ++s) {
      cost::CostParams p{0.1 + u(rng) * 4, u(rng) * 3, 0.1 + u(rng) * 3, 0.0, u(rng)};
      p.c_ttt = p.c_rag + 0.05 + u(rng) * 10;
      const std::size_t n = 1 + rng() % 150;
      model::RewardScript script;
      std::vector<Query> queries;
      for (std::size_t i = 0; i < n; ++i) {
        const std::string id = "c" + std::to_string(i);
        script.set(id, ProducedBy::Direct, u(rng) * 4);
        script.set(id, ProducedBy::Rag, u(rng) * 4);
        script.set(id, ProducedBy::Ttt, u(rng) * 4);
        queries.push_back(Query{id, domain_text(rng), std::nullopt});
      }
      Bench bench(script);
      pipeline::PipelineConfig cfg;
      cfg.mode = mode;
      const auto records = pipeline::run_stream(queries, cfg, bench.deps(nullptr, p));
      const auto m = pipeline::compute_metrics(records, p);
      ++scenarios;
      if (m.error_count != 0 || !m.cost_report || m.cost_report->mode != cost_mode) {
        ++failures_seen;
        continue;
      }
      const auto& r = m.cost_report->reconcile;
      const double rel = r.relative_delta();
      worst = std::max(worst, rel);
      if (!(rel <= 1e-9)) ++failures_seen;
    }
  }

  // Worked scenario: 150 direct, 250 RAG, 600 TTT out of 1000.
  std::vector<int> kind(1000);
  std::fill(kind.begin() + 150, kind.begin() + 400, 1);
  std::fill(kind.begin() + 400, kind.end(), 2);
  std::shuffle(kind.begin(), kind.end(), rng);
  model::RewardScript script(0.0);
  std::vector<Query> queries;
  for (int i = 0; i < 1000; ++i) {
    const std::string id = "w" + std::to_string(i);
    script.set(id, ProducedBy::Direct, kind[i] == 0 ? 3.0 : 1.0);
    script.set(id, ProducedBy::Rag, kind[i] == 1 ? 1.5 : 0.5);
    queries.push_back(Query{id, domain_text(rng), std::nullopt});
  }
  Bench bench(script);
  const cost::CostParams p{1, 1, 2, 5, 0.5};
  const auto m = pipeline::compute_metrics(pipeline::run_stream(queries, {}, bench.deps(nullptr, p)), p);
  const auto& r = m.cost_report->reconcile;
  const bool worked = m.cost_report->d_rag == 0.25 && m.cost_report->d_ttt == 0.60 &&
                      std::abs(r.event - 7475.0) <= 1e-9 * 7475.0 && r.relative_delta() <= 1e-9;
  return {failures_seen == 0 && worked,
          fmt::format("{} scenarios over 5 modes, {} failures, worst relative delta {:.2e} (limit 1e-9); "
                      "worked scenario d=({:.2f},{:.2f}) event {} closed {}",
                      scenarios, failures_seen, worst, m.cost_report->d_rag, m.cost_report->d_ttt, r.event,
                      r.closed)};
}

Result cost_ordering() {
  std::mt19937_64 rng(7007);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  long violations = 0;
  constexpr int kSamples = 100000;
  for (int i = 0; i < kSamples; ++i) {
    cost::CostParams p{u(rng) * 10, u(rng) * 10, 1e-6 + u(rng) * 10, 0.0, u(rng) * 10};
    p.c_ttt = p.c_rag * (1.0 + 1e-6 + u(rng) * 5);
    if (i % 7 == 0) p.c0 = 0.0;
    const std::size_t n = 1 + rng() % 1000000;
    const double no = cost::closed_form(cost::CostMode::NoAdapt, n, p, 0, 0);
    const double rag = cost::closed_form(cost::CostMode::Rag, n, p, 0, 0);
    const double ttt = cost::closed_form(cost::CostMode::Ttt, n, p, 0, 0);
    if (!(ttt > rag && rag > no)) ++violations;
  }
  return {violations == 0, fmt::format("{} violations over {} parameter sets", violations, kSamples)};
}

// --- sweeps and scenarios -------------------------------------------------

Result sweep_monotonicity() {
  std::mt19937_64 rng(8008);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  const std::vector<double> taus{2.0, 5.0, 8.0};
  long violations = 0;
  std::string first_row;
  for (int trial = 0; trial < 20; ++trial) {
    model::RewardScript script;
    std::vector<Query> queries;
    for (int i = 0; i < 100; ++i) {
      const std::string id = "s" + std::to_string(i);
      script.set(id, ProducedBy::Direct, u(rng));
      script.set(id, ProducedBy::Rag, u(rng));
      queries.push_back(Query{id, domain_text(rng), std::nullopt});
    }
    Bench bench(script);
    pipeline::PipelineConfig cfg;
    cfg.mode = trial % 2 ? pipeline::Mode::Joint : pipeline::Mode::Sequential;
    const auto rows = pipeline::sweep_threshold(queries, taus, cfg, bench.deps());
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto& prev = *rows[i - 1].metrics.strategy_distribution;
      const auto& cur = *rows[i].metrics.strategy_distribution;
      if (cur.at(Strategy::NoAdaptation) > prev.at(Strategy::NoAdaptation)) ++violations;
      if (cur.at(Strategy::Rag) + cur.at(Strategy::Ttt) < prev.at(Strategy::Rag) + prev.at(Strategy::Ttt)) ++violations;
    }
    if (trial == 0) {
      for (const auto& r : rows) {
        first_row += fmt::format(" tau={}:{:.2f}", r.tau_r, r.metrics.strategy_distribution->at(Strategy::NoAdaptation));
      }
    }
  }
  return {violations == 0,
          fmt::format("{} violations over 20 scripted streams; first stream no-adaptation fraction{}", violations,
                      first_row)};
}

Result strategy_split_scenario() {
  // 133 / 266 / 601 of 1000 queries forced into each branch, in shuffled order.
  std::mt19937_64 rng(9009);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<int> kind(1000);
  std::fill(kind.begin() + 133, kind.begin() + 399, 1);
  std::fill(kind.begin() + 399, kind.end(), 2);
  std::shuffle(kind.begin(), kind.end(), rng);
  model::RewardScript script;
  std::vector<Query> queries;
  for (int i = 0; i < 1000; ++i) {
    const std::string id = "p" + std::to_string(i);
    const double r0 = kind[i] == 0 ? 2.0 + u(rng) * 3 : u(rng) * 1.9;
    const double r_rag = kind[i] == 1 ? r0 + 0.01 + u(rng) : r0 - u(rng) * r0;
    script.set(id, ProducedBy::Direct, r0).set(id, ProducedBy::Rag, r_rag);
    queries.push_back(Query{id, domain_text(rng), std::nullopt});
  }
  Bench bench(script);
  const auto m = pipeline::compute_metrics(pipeline::run_stream(queries, {}, bench.deps()), {});
  const auto& d = *m.strategy_distribution;
  const double no = 100 * d.at(Strategy::NoAdaptation), rag = 100 * d.at(Strategy::Rag), ttt = 100 * d.at(Strategy::Ttt);
  const bool ok = std::abs(no - 13.3) <= 0.5 && std::abs(rag - 26.6) <= 0.5 && std::abs(ttt - 60.1) <= 0.5;
  return {ok, fmt::format("split {:.1f}/{:.1f}/{:.1f} vs target 13.3/26.6/60.1 (tolerance 0.5pp)", no, rag, ttt)};
}

Result near_duplicate_utilization() {
  // 40 topics in turn, three paraphrases each sharing four of five words; every
  // query routes to TTT. Words are random letter strings: numbered words such as
  // medical17 land in correlated hash buckets and would merge unrelated topics.
  std::mt19937_64 rng(1010);
  auto word = [&] {
    std::string w(7, 'a');
    for (auto& c : w) c = static_cast<char>('a' + rng() % 26);
    return w;
  };
  std::vector<Query> queries;
  for (int t = 0; t < 40; ++t) {
    std::string topic;
    for (int w = 0; w < 4; ++w) topic += word() + " ";
    for (int p = 0; p < 3; ++p) {
      queries.push_back(Query{fmt::format("n{}-{}", t, p), topic + word(), std::string("medical")});
    }
  }
  Bench bench(model::RewardScript(0.0));
  qsc::QueryStateCache cache{qsc::QscConfig{}};
  pipeline::PipelineConfig cfg;
  cfg.qsc_enabled = true;
  const auto m = pipeline::compute_metrics(pipeline::run_stream(queries, cfg, bench.deps(&cache)), {});
  const double rag = m.cache_utilization.rag.value_or(-1), ttt = m.cache_utilization.ttt.value_or(-1);
  const bool ok = rag >= 0.60 && rag <= 0.70 && ttt >= 0.60 && ttt <= 0.70 &&
                  m.strategy_distribution->at(Strategy::Ttt) == 1.0;
  return {ok, fmt::format("RAG utilization {:.3f}, TTT utilization {:.3f} over {} queries (band 0.60-0.70)", rag, ttt,
                          queries.size())};
}

// --- end to end -----------------------------------------------------------

int run_cli(const std::string& args) {
  const std::string cmd = std::string(RTTC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Result full_run_determinism() {
  const fs::path dir = fs::temp_directory_path() / "rttc-acceptance-determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::mt19937_64 rng(1111);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  json entries = json::array();
  std::string queries;
  for (int i = 0; i < 200; ++i) {
    const std::string id = "d" + std::to_string(i);
    entries.push_back({{"query_id", id}, {"produced_by", "Direct"}, {"value", u(rng)}});
    entries.push_back({{"query_id", id}, {"produced_by", "Rag"}, {"value", u(rng)}});
    queries += json{{"id", id}, {"text", domain_text(rng)}}.dump() + "\n";
  }
  app::write_file(dir / "rewards.json", json{{"default", 1.0}, {"entries", entries}}.dump());
  app::write_file(dir / "queries.jsonl", queries);
  const json config{{"pipeline", {{"qsc_enabled", true}}},
                    {"backends", {{"knowledge_base", {{"synthetic", {{"samples_per_domain", 50}}}}},
                                  {"reward_script", "rewards.json"}}},
                    {"seed", 3}};
  app::write_file(dir / "config.json", config.dump(2));
  const std::string base =
      "run --config " + (dir / "config.json").string() + " --queries " + (dir / "queries.jsonl").string();
  int codes = 0;
  for (int i = 1; i <= 2; ++i) {
    codes += run_cli(fmt::format("{} --out {} --metrics {} --save-qsc-state {}", base,
                                 (dir / fmt::format("outcomes{}.jsonl", i)).string(),
                                 (dir / fmt::format("metrics{}.json", i)).string(),
                                 (dir / fmt::format("state{}.json", i)).string()));
  }
  if (codes != 0) return {false, "rttc run exited non-zero"};
  const bool same = app::read_file(dir / "outcomes1.jsonl") == app::read_file(dir / "outcomes2.jsonl") &&
                    app::read_file(dir / "metrics1.json") == app::read_file(dir / "metrics2.json") &&
                    app::read_file(dir / "state1.json") == app::read_file(dir / "state2.json");
  const auto size = fs::file_size(dir / "outcomes1.jsonl");
  return {same, fmt::format("two runs of 200 queries with QSC on: outcome ({} bytes), metrics and cache state {}", size,
                            same ? "byte-identical" : "DIFFER")};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  report("routing soundness", routing_soundness);
  report("joint max-selection", joint_max_selection);
  report("retrieval exactness", retrieval_exactness);
  report("qsc contract", qsc_contract);
  report("qsc transparency", qsc_transparency);
  report("cost reconciliation", cost_reconciliation);
  report("cost ordering", cost_ordering);
  report("threshold sweep monotonicity", sweep_monotonicity);
  report("strategy split scenario", strategy_split_scenario);
  report("near-duplicate cache utilization", near_duplicate_utilization);
  report("full-run determinism", full_run_determinism);
  std::cout << (failures == 0 ? "all criteria passed" : fmt::format("{} criteria failed", failures)) << std::endl;
  return failures == 0 ? 0 : 1;
}
