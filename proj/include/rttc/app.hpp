#pragma once

// Operator surface behind the `rttc` binary: configuration, backend wiring
// and the run / sweep / report / ingest / serve commands.
//
// Config file (every section optional, unknown keys rejected):
//   {
//     "pipeline": {"tau_r", "k", "mode", "hyper", "qsc_enabled", ...},
//     "qsc":      {"tau_e", "budget", "metric", "eviction"},
//     "cost":     {"c0", "c_ret", "c_rag", "c_ttt", "c_rew"},
//     "backends": {
//       "knowledge_base": "<dir>" | {"path": "<dir>"} | {"url": "..."} | {"synthetic": {...}},
//       "model": "simulated" | {"url": "..."},
//       "reward_script": {...} | "<file>",     (simulated model only)
//       "embedding_dim": 64, "base_id": "base", "timeout_ms": 30000
//     },
//     "seed": 0,
//     "out_dir": "."
//   }
// Relative paths inside the file resolve against the file's directory.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "rttc/cost_model.hpp"
#include "rttc/error.hpp"
#include "rttc/kb_service.hpp"
#include "rttc/pipeline.hpp"
#include "rttc/qsc.hpp"
#include "rttc/simulated_models.hpp"
#include "rttc/synthetic_corpus.hpp"

namespace rttc::app {

struct KbPath {
  std::filesystem::path dir;
};
struct KbUrl {
  std::string url;
};
using KbBackend = std::variant<KbPath, KbUrl, kb::SyntheticCorpusSpec>;

struct BackendsConfig {
  KbBackend knowledge_base = kb::SyntheticCorpusSpec{};
  std::optional<std::string> model_url;  // simulated when absent
  model::RewardScript reward_script;
  std::size_t embedding_dim = model::FeatureHashEmbedder::kDefaultDim;
  std::string base_id = "base";
  std::chrono::milliseconds timeout{30000};
};

struct RunConfig {
  pipeline::PipelineConfig pipeline;
  qsc::QscConfig qsc;
  cost::CostParams cost;
  BackendsConfig backends;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = ".";
};

// ConfigError on anything invalid or unknown.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
// IoError if unreadable, ConfigError if not valid JSON or invalid.
RunConfig load_run_config(const std::filesystem::path& path);

// Owns the backends a config names and hands out pipeline dependencies.
class Runtime {
 public:
  explicit Runtime(const RunConfig& config);
  ~Runtime();

  // `cache` is attached as-is; pass nullptr when QSC is off.
  pipeline::PipelineDeps deps(qsc::QueryStateCache* cache) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// {"id","text","domain_hint"?} per line. IoError, ParseError, MalformedRecord;
// EmptyStream when the file holds no queries.
std::vector<Query> read_queries_jsonl(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

// 2 ConfigError, 3 IoError, 4 for every other input problem.
int exit_code_for(ErrorCode code);

struct RunOptions {
  std::filesystem::path config;
  std::filesystem::path queries;
  std::optional<std::filesystem::path> out;      // default <out_dir>/outcomes.jsonl
  std::optional<std::filesystem::path> metrics;  // default <out_dir>/metrics.json
  std::optional<std::filesystem::path> qsc_state_in;
  std::optional<std::filesystem::path> qsc_state_out;
  std::size_t parallel = 1;
};

// 0 when every query succeeded, 1 when some failed, else exit_code_for().
int cmd_run(const RunOptions& options);

struct SweepOptions {
  std::filesystem::path config;
  std::filesystem::path queries;
  std::vector<double> taus;
  std::filesystem::path out_prefix;  // writes <prefix>.csv and <prefix>.json
};

int cmd_sweep(const SweepOptions& options);

// "2.0,5.0,8.0" -> {2, 5, 8}. ConfigError on junk.
std::vector<double> parse_taus(std::string_view text);

std::string sweep_csv(const std::vector<pipeline::SweepRow>& rows);

// Writes the metrics of an outcomes file to `out`.
int cmd_report(const std::filesystem::path& outcomes, const std::filesystem::path& cost_params,
               std::ostream& out);

int cmd_kb_ingest(const std::filesystem::path& input, const std::filesystem::path& out_dir,
                  std::size_t dim);

// Block serving until the process is stopped. The bound port is printed to
// stdout as "listening on <port>".
int cmd_kb_serve(const std::filesystem::path& base_dir, const std::string& bind);
int cmd_model_sim_serve(const std::string& bind, std::size_t dim,
                        const std::optional<std::filesystem::path>& reward_script);

// Metrics JSON exactly as written to disk (pretty-printed, trailing newline).
std::string render_metrics(const pipeline::RunMetrics& metrics);
std::string render_outcomes(const std::vector<pipeline::StreamRecord>& records);

}  // namespace rttc::app
