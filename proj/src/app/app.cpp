#include "rttc/app.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "rttc/json_codec.hpp"
#include "rttc/knowledge_base.hpp"
#include "rttc/model_protocol.hpp"

namespace rttc::app {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  return buf.str();
}

void write_file(const fs::path& path, const std::string& contents) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << contents;
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError: return 2;
    case ErrorCode::IoError: return 3;
    default: return 4;
  }
}

// Config

namespace {

fs::path resolve(const fs::path& base_dir, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

KbBackend parse_kb_backend(const json& j, const fs::path& base_dir, std::uint64_t seed) {
  if (j.is_string()) return KbPath{resolve(base_dir, j.get<std::string>())};
  if (!j.is_object() || j.size() != 1) {
    throw Error(ErrorCode::ConfigError, "backends.knowledge_base needs exactly one of path, url, synthetic");
  }
  const auto& [key, value] = *j.items().begin();
  if (key == "path") return KbPath{resolve(base_dir, value.get<std::string>())};
  if (key == "url") return KbUrl{value.get<std::string>()};
  if (key == "synthetic") return kb::synthetic_spec_from_json(value, seed);
  throw Error(ErrorCode::ConfigError, "unknown key backends.knowledge_base." + key);
}

BackendsConfig parse_backends(const json& j, const fs::path& base_dir, std::uint64_t seed) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "backends must be an object");
  BackendsConfig b;
  b.knowledge_base = kb::SyntheticCorpusSpec{.seed = seed};
  for (const auto& [key, value] : j.items()) {
    if (key == "knowledge_base") {
      b.knowledge_base = parse_kb_backend(value, base_dir, seed);
    } else if (key == "model") {
      if (value.is_string() && value.get<std::string>() == "simulated") {
        b.model_url.reset();
      } else if (value.is_object() && value.size() == 1 && value.contains("url")) {
        b.model_url = value.at("url").get<std::string>();
      } else {
        throw Error(ErrorCode::ConfigError, "backends.model must be \"simulated\" or {\"url\": ...}");
      }
    } else if (key == "reward_script") {
      const json script = value.is_string() ? parse_json(read_file(resolve(base_dir, value.get<std::string>())))
                                            : value;
      b.reward_script = model::RewardScript::from_json(script);
    } else if (key == "embedding_dim") {
      if (!value.is_number_integer() || value.get<std::int64_t>() <= 0) {
        throw Error(ErrorCode::ConfigError, "backends.embedding_dim must be a positive integer");
      }
      b.embedding_dim = value.get<std::size_t>();
    } else if (key == "base_id") {
      b.base_id = value.get<std::string>();
      if (b.base_id.empty()) throw Error(ErrorCode::ConfigError, "backends.base_id must not be empty");
    } else if (key == "timeout_ms") {
      if (!value.is_number_integer() || value.get<std::int64_t>() <= 0) {
        throw Error(ErrorCode::ConfigError, "backends.timeout_ms must be a positive integer");
      }
      b.timeout = std::chrono::milliseconds(value.get<std::int64_t>());
    } else {
      throw Error(ErrorCode::ConfigError, "unknown key backends." + key);
    }
  }
  return b;
}

}  // namespace

RunConfig parse_run_config(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "config must be a JSON object");
  RunConfig c;
  try {
    if (j.contains("seed")) {
      const json& seed = j.at("seed");
      if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<std::int64_t>() < 0)) {
        throw Error(ErrorCode::ConfigError, "seed must be a non-negative integer");
      }
      c.seed = seed.get<std::uint64_t>();
    }
    c.backends.knowledge_base = kb::SyntheticCorpusSpec{.seed = c.seed};
    for (const auto& [key, value] : j.items()) {
      if (key == "pipeline") c.pipeline = value.get<pipeline::PipelineConfig>();
      else if (key == "qsc") c.qsc = value.get<qsc::QscConfig>();
      else if (key == "cost") c.cost = value.get<cost::CostParams>();
      else if (key == "backends") c.backends = parse_backends(value, base_dir, c.seed);
      else if (key == "seed") continue;
      else if (key == "out_dir") c.out_dir = resolve(base_dir, value.get<std::string>());
      else throw Error(ErrorCode::ConfigError, "unknown config key " + key);
    }
    pipeline::validate(c.pipeline);
    qsc::validate(c.qsc);
    cost::validate(c.cost);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError || e.code() == ErrorCode::IoError) throw;
    throw Error(ErrorCode::ConfigError, e.detail());
  }
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
  return parse_run_config(j, path.parent_path());
}

// Runtime

struct Runtime::Impl {
  std::shared_ptr<const model::Generator> generator;
  std::shared_ptr<const model::Scorer> scorer;
  std::shared_ptr<const model::Embedder> embedder;
  std::shared_ptr<const model::Trainer> trainer;
  std::unique_ptr<kb::Retriever> retriever;
  cost::CostParams cost;
  std::string base_id;
};

Runtime::Runtime(const RunConfig& config) : impl_(std::make_unique<Impl>()) {
  const auto& b = config.backends;
  if (b.model_url) {
    auto remote = std::make_shared<model::RemoteModelBackend>(*b.model_url, b.embedding_dim, b.timeout);
    impl_->generator = remote;
    impl_->scorer = remote;
    impl_->embedder = remote;
    impl_->trainer = remote;
  } else {
    impl_->generator = std::make_shared<model::SimulatedGenerator>();
    impl_->scorer = std::make_shared<model::SimulatedScorer>(b.reward_script);
    impl_->embedder = std::make_shared<model::FeatureHashEmbedder>(b.embedding_dim);
    impl_->trainer = std::make_shared<model::SimulatedTrainer>();
  }

  if (const auto* p = std::get_if<KbPath>(&b.knowledge_base)) {
    auto base = kb::KnowledgeBase::load(p->dir);
    if (base.dim() != b.embedding_dim) {
      throw Error(ErrorCode::ConfigError, fmt::format("knowledge base dim {} differs from embedding_dim {}",
                                                      base.dim(), b.embedding_dim));
    }
    impl_->retriever = std::make_unique<kb::KbService>(std::move(base));
  } else if (const auto* u = std::get_if<KbUrl>(&b.knowledge_base)) {
    impl_->retriever = std::make_unique<kb::RemoteRetriever>(u->url, b.timeout);
  } else {
    const auto& spec = std::get<kb::SyntheticCorpusSpec>(b.knowledge_base);
    kb::KnowledgeBase base(b.embedding_dim);
    base.ingest(kb::synthetic_corpus(spec), *impl_->embedder);
    impl_->retriever = std::make_unique<kb::KbService>(std::move(base));
  }
  impl_->cost = config.cost;
  impl_->base_id = b.base_id;
}

Runtime::~Runtime() = default;

pipeline::PipelineDeps Runtime::deps(qsc::QueryStateCache* cache) const {
  pipeline::PipelineDeps d;
  d.generator = impl_->generator.get();
  d.scorer = impl_->scorer.get();
  d.embedder = impl_->embedder.get();
  d.trainer = impl_->trainer.get();
  d.retriever = impl_->retriever.get();
  d.cache = cache;
  d.cost = impl_->cost;
  d.base_id = impl_->base_id;
  return d;
}

// Inputs and outputs

std::vector<Query> read_queries_jsonl(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<Query> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
    if (j.contains("domain_hint") && j.at("domain_hint").is_null()) j.erase("domain_hint");
    Query q = decode<Query>(j);
    validate(q);
    out.push_back(std::move(q));
  }
  if (out.empty()) throw Error(ErrorCode::EmptyStream, path.string() + " holds no queries");
  return out;
}

std::string render_metrics(const pipeline::RunMetrics& metrics) {
  return pipeline::to_json(metrics).dump(2) + "\n";
}

std::string render_outcomes(const std::vector<pipeline::StreamRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += pipeline::to_json(r).dump();
    out += '\n';
  }
  return out;
}

namespace {

template <typename F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e.code());
  }
}

}  // namespace

int cmd_run(const RunOptions& options) {
  return guarded([&] {
    const RunConfig config = load_run_config(options.config);
    const auto queries = read_queries_jsonl(options.queries);
    const Runtime runtime(config);
    std::optional<qsc::QueryStateCache> cache;
    if (config.pipeline.qsc_enabled) cache.emplace(config.qsc);
    if (options.qsc_state_in) {
      if (!cache) throw Error(ErrorCode::ConfigError, "--qsc-state needs pipeline.qsc_enabled");
      cache->replace_state(qsc::load_state(parse_json(read_file(*options.qsc_state_in)), config.qsc.budget));
    }
    const auto records = pipeline::run_stream(queries, config.pipeline,
                                              runtime.deps(cache ? &*cache : nullptr), options.parallel);
    const auto metrics = pipeline::compute_metrics(records, config.cost);

    write_file(options.out.value_or(config.out_dir / "outcomes.jsonl"), render_outcomes(records));
    write_file(options.metrics.value_or(config.out_dir / "metrics.json"), render_metrics(metrics));
    if (options.qsc_state_out) {
      if (!cache) throw Error(ErrorCode::ConfigError, "--save-qsc-state needs pipeline.qsc_enabled");
      write_file(*options.qsc_state_out, qsc::dump_state(cache->state()).dump() + "\n");
    }
    spdlog::info("{} queries, {} errors", metrics.query_count, metrics.error_count);
    return metrics.error_count == 0 ? 0 : 1;
  });
}

std::vector<double> parse_taus(std::string_view text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item(text.substr(pos, comma - pos));
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigError, "bad threshold '" + item + "'");
    }
    if (used != item.size()) throw Error(ErrorCode::ConfigError, "bad threshold '" + item + "'");
    out.push_back(v);
    pos = comma + 1;
  }
  return out;
}

namespace {

std::string csv_number(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string(); }

}  // namespace

std::string sweep_csv(const std::vector<pipeline::SweepRow>& rows) {
  std::string out = "tau_r,no_adaptation,rag,ttt,mean_cost,rag_cache_utilization,ttt_cache_utilization,error_count\n";
  for (const auto& row : rows) {
    const auto& m = row.metrics;
    auto frac = [&](Strategy s) {
      return m.strategy_distribution ? std::optional<double>(m.strategy_distribution->at(s)) : std::nullopt;
    };
    out += fmt::format("{},{},{},{},{},{},{},{}\n", row.tau_r, csv_number(frac(Strategy::NoAdaptation)),
                       csv_number(frac(Strategy::Rag)), csv_number(frac(Strategy::Ttt)), row.mean_cost,
                       csv_number(m.cache_utilization.rag), csv_number(m.cache_utilization.ttt),
                       m.error_count);
  }
  return out;
}

int cmd_sweep(const SweepOptions& options) {
  return guarded([&] {
    const RunConfig config = load_run_config(options.config);
    const auto queries = read_queries_jsonl(options.queries);
    const Runtime runtime(config);
    const auto rows = pipeline::sweep_threshold(queries, options.taus, config.pipeline,
                                                runtime.deps(nullptr), config.qsc);
    json rows_json = json::array();
    std::size_t errors = 0;
    for (const auto& row : rows) {
      rows_json.push_back(pipeline::to_json(row));
      errors += row.metrics.error_count;
    }
    write_file(options.out_prefix.string() + ".csv", sweep_csv(rows));
    write_file(options.out_prefix.string() + ".json", rows_json.dump(2) + "\n");
    return errors == 0 ? 0 : 1;
  });
}

int cmd_report(const fs::path& outcomes, const fs::path& cost_params, std::ostream& out) {
  return guarded([&] {
    cost::CostParams params;
    try {
      params = parse_json(read_file(cost_params)).get<cost::CostParams>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, e.what());
    }
    cost::validate(params);
    std::istringstream in(read_file(outcomes));
    std::vector<pipeline::StreamRecord> records;
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      records.push_back(pipeline::stream_record_from_json(parse_json(line)));
    }
    if (records.empty()) throw Error(ErrorCode::ParseError, outcomes.string() + " holds no outcomes");
    out << render_metrics(pipeline::compute_metrics(records, params));
    out.flush();
    return 0;
  });
}

int cmd_kb_ingest(const fs::path& input, const fs::path& out_dir, std::size_t dim) {
  return guarded([&] {
    std::istringstream in(read_file(input));
    const auto records = kb::read_records_jsonl(in);
    const model::FeatureHashEmbedder embedder(dim);
    kb::KnowledgeBase base(dim);
    base.ingest(records, embedder);
    base.save(out_dir);
    std::cout << "ingested " << base.size() << " samples into " << out_dir.string() << "\n";
    return 0;
  });
}

namespace {

int serve(http::JsonService& service, const std::string& bind) {
  const int port = service.bind(http::parse_bind_address(bind));
  std::cout << "listening on " << port << std::endl;
  service.run();
  return 0;
}

}  // namespace

int cmd_kb_serve(const fs::path& base_dir, const std::string& bind) {
  return guarded([&] {
    auto base = kb::KnowledgeBase::load(base_dir);
    auto embedder = std::make_shared<const model::FeatureHashEmbedder>(base.dim());
    kb::KbService kb_service(std::move(base), embedder);
    http::JsonService service;
    kb_service.mount(service);
    return serve(service, bind);
  });
}

int cmd_model_sim_serve(const std::string& bind, std::size_t dim,
                        const std::optional<fs::path>& reward_script) {
  return guarded([&] {
    const model::SimulatedGenerator generator;
    const model::SimulatedScorer scorer(
        reward_script ? model::RewardScript::from_json(parse_json(read_file(*reward_script)))
                      : model::RewardScript());
    const model::FeatureHashEmbedder embedder(dim);
    const model::SimulatedTrainer trainer;
    model::ModelProtocolHandler handler(generator, scorer, embedder, trainer);
    http::JsonService service;
    handler.mount(service);
    return serve(service, bind);
  });
}

}  // namespace rttc::app
