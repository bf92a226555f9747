#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "rttc/app.hpp"

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("rttc");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("RTTC_LOG")) {
    spdlog::set_level(spdlog::level::from_str(level));
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  namespace app = rttc::app;

  CLI::App cli{"Reward-gated routing between direct answers, retrieval augmentation and test-time training"};
  cli.require_subcommand(1);
  int code = 0;

  auto* kb = cli.add_subcommand("kb", "Knowledge base tools");
  kb->require_subcommand(1);

  std::string ingest_input, ingest_out;
  std::size_t ingest_dim = rttc::model::FeatureHashEmbedder::kDefaultDim;
  auto* ingest = kb->add_subcommand("ingest", "Embed a JSONL corpus into a knowledge base directory");
  ingest->add_option("--input", ingest_input, "JSONL of {prompt, completion, domain}")->required();
  ingest->add_option("--out", ingest_out, "Output directory")->required();
  ingest->add_option("--dim", ingest_dim, "Embedding dimension")->check(CLI::PositiveNumber);
  ingest->callback([&] { code = app::cmd_kb_ingest(ingest_input, ingest_out, ingest_dim); });

  std::string serve_base, serve_bind = "127.0.0.1:8700";
  auto* kb_serve = kb->add_subcommand("serve", "Serve /retrieve, /ingest and /stats");
  kb_serve->add_option("--base", serve_base, "Knowledge base directory")->required();
  kb_serve->add_option("--bind", serve_bind, "host:port (port 0 picks a free one)");
  kb_serve->callback([&] { code = app::cmd_kb_serve(serve_base, serve_bind); });

  app::RunOptions run_opts;
  std::string run_out, run_metrics, run_state_in, run_state_out;
  auto* run = cli.add_subcommand("run", "Route a query stream and write outcomes and metrics");
  run->add_option("--config", run_opts.config, "Config JSON")->required();
  run->add_option("--queries", run_opts.queries, "Query JSONL")->required();
  run->add_option("--out", run_out, "Outcomes JSONL");
  run->add_option("--metrics", run_metrics, "Metrics JSON");
  run->add_option("--qsc-state", run_state_in, "Start from a saved cache state");
  run->add_option("--save-qsc-state", run_state_out, "Write the final cache state");
  run->add_option("--parallel", run_opts.parallel,
                  "Worker threads; not reproducible with the cache enabled")
      ->check(CLI::PositiveNumber);
  run->callback([&] {
    if (!run_out.empty()) run_opts.out = run_out;
    if (!run_metrics.empty()) run_opts.metrics = run_metrics;
    if (!run_state_in.empty()) run_opts.qsc_state_in = run_state_in;
    if (!run_state_out.empty()) run_opts.qsc_state_out = run_state_out;
    code = app::cmd_run(run_opts);
  });

  app::SweepOptions sweep_opts;
  std::string taus;
  auto* sweep = cli.add_subcommand("sweep", "Run the stream once per reward threshold");
  sweep->add_option("--config", sweep_opts.config, "Config JSON")->required();
  sweep->add_option("--queries", sweep_opts.queries, "Query JSONL")->required();
  sweep->add_option("--taus", taus, "Comma separated, strictly ascending")->required();
  sweep->add_option("--out", sweep_opts.out_prefix, "Output prefix for .csv and .json")->required();
  sweep->callback([&] {
    try {
      sweep_opts.taus = app::parse_taus(taus);
    } catch (const rttc::Error& e) {
      spdlog::error("{}", e.what());
      code = app::exit_code_for(e.code());
      return;
    }
    code = app::cmd_sweep(sweep_opts);
  });

  std::string report_outcomes, report_cost;
  auto* report = cli.add_subcommand("report", "Recompute metrics from an outcomes file");
  report->add_option("--outcomes", report_outcomes, "Outcomes JSONL")->required();
  report->add_option("--cost-params", report_cost, "Cost params JSON")->required();
  report->callback([&] { code = app::cmd_report(report_outcomes, report_cost, std::cout); });

  auto* model_sim = cli.add_subcommand("model-sim", "Simulated model backends");
  model_sim->require_subcommand(1);
  std::string sim_bind = "127.0.0.1:8701", sim_script;
  std::size_t sim_dim = rttc::model::FeatureHashEmbedder::kDefaultDim;
  auto* sim_serve = model_sim->add_subcommand("serve", "Serve /generate, /score, /embed and /train");
  sim_serve->add_option("--bind", sim_bind, "host:port (port 0 picks a free one)");
  sim_serve->add_option("--dim", sim_dim, "Embedding dimension")->check(CLI::PositiveNumber);
  sim_serve->add_option("--reward-script", sim_script, "Reward script JSON");
  sim_serve->callback([&] {
    std::optional<std::filesystem::path> script;
    if (!sim_script.empty()) script = sim_script;
    code = app::cmd_model_sim_serve(sim_bind, sim_dim, script);
  });

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return cli.exit(e);
  }
  return code;
}
