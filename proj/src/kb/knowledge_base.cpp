#include "rttc/knowledge_base.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "rttc/digest.hpp"
#include "rttc/error.hpp"
#include "rttc/json_codec.hpp"

namespace rttc::kb {

namespace {

constexpr const char* kFormat = "rttc-kb/1";
constexpr const char* kSamplesFile = "samples.jsonl";
constexpr const char* kManifestFile = "manifest.json";

std::string make_sample_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "kb-%06zu", index);
  return buf;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

KnowledgeRecord record_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "record must be a JSON object");
  KnowledgeRecord r;
  try {
    r.prompt = j.at("prompt").get<std::string>();
    r.completion = j.value("completion", std::string());
    r.domain = j.at("domain").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, e.what());
  }
  return r;
}

}  // namespace

KnowledgeBase::KnowledgeBase(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw Error(ErrorCode::ConfigError, "knowledge base dim must be positive");
}

void KnowledgeBase::append(KnowledgeSample sample) {
  const auto values = sample.embedding.values();
  matrix_.insert(matrix_.end(), values.begin(), values.end());
  ++domain_counts_[sample.domain];
  samples_.push_back(std::move(sample));
}

std::size_t KnowledgeBase::ingest(std::span<const KnowledgeRecord> records,
                                  const model::Embedder& embedder) {
  if (records.empty()) return 0;
  if (embedder.dim() != dim_) {
    throw Error(ErrorCode::DimMismatch, "embedder dim " + std::to_string(embedder.dim()) +
                                            " vs base dim " + std::to_string(dim_));
  }
  std::vector<KnowledgeSample> staged;
  staged.reserve(records.size());
  for (const auto& r : records) {
    if (r.prompt.empty() || r.domain.empty()) {
      throw Error(ErrorCode::MalformedRecord, "record needs a non-empty prompt and domain");
    }
    Embedding e = embedder.embed(r.prompt);
    if (e.dim() != dim_) throw Error(ErrorCode::DimMismatch, "embedder returned wrong dim");
    staged.push_back(KnowledgeSample{make_sample_id(samples_.size() + staged.size()), r.prompt,
                                     r.completion, r.domain, std::move(e)});
  }
  for (auto& s : staged) append(std::move(s));
  return staged.size();
}

RetrievedSet KnowledgeBase::retrieve_top_k(const Embedding& query, int k) const {
  if (k < 0) throw Error(ErrorCode::InvalidArgument, "k must be non-negative");
  if (query.dim() != dim_) {
    throw Error(ErrorCode::DimMismatch, "query dim " + std::to_string(query.dim()) +
                                            " vs base dim " + std::to_string(dim_));
  }
  RetrievedSet out;
  out.k_requested = k;
  const std::size_t n = samples_.size();
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), n);
  if (take == 0) return out;

  const auto q = query.values();
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = matrix_.data() + i * dim_;
    double sum = 0.0;
    for (std::size_t d = 0; d < dim_; ++d) sum += row[d] * q[d];
    scores[i] = sum;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto better = [&scores](std::size_t a, std::size_t b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    better);

  out.samples.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    const auto& s = samples_[order[i]];
    out.samples.push_back(
        RetrievedSample{s.sample_id, s.prompt, s.completion, s.domain, scores[order[i]]});
  }
  return out;
}

void KnowledgeBase::save(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  std::string lines;
  for (const auto& s : samples_) {
    lines += json(s).dump();
    lines += '\n';
  }
  write_file(dir / kSamplesFile, lines);
  const json manifest{{"format", kFormat},
                      {"dim", dim_},
                      {"total", samples_.size()},
                      {"domains", domain_counts_},
                      {"digest", sha256_hex(lines)}};
  write_file(dir / kManifestFile, manifest.dump(2) + "\n");
}

KnowledgeBase KnowledgeBase::load(const std::filesystem::path& dir) {
  const json manifest = parse_json(read_file(dir / kManifestFile));
  const std::string lines = read_file(dir / kSamplesFile);
  try {
    if (manifest.at("format").get<std::string>() != kFormat) {
      throw Error(ErrorCode::ParseError, "unsupported knowledge base format");
    }
    if (manifest.at("digest").get<std::string>() != sha256_hex(lines)) {
      throw Error(ErrorCode::ParseError, "samples.jsonl does not match manifest digest");
    }
    KnowledgeBase base(manifest.at("dim").get<std::size_t>());
    std::unordered_set<std::string> ids;
    std::istringstream in(lines);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      KnowledgeSample s = knowledge_sample_from_json(parse_json(line));
      if (s.embedding.dim() != base.dim_) {
        throw Error(ErrorCode::DimMismatch, "sample " + s.sample_id + " has wrong dim");
      }
      if (s.domain.empty() || !ids.insert(s.sample_id).second) {
        throw Error(ErrorCode::ParseError, "duplicate or malformed sample " + s.sample_id);
      }
      base.append(std::move(s));
    }
    if (base.size() != manifest.at("total").get<std::size_t>()) {
      throw Error(ErrorCode::ParseError, "sample count does not match manifest");
    }
    return base;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("manifest: ") + e.what());
  }
}

std::vector<KnowledgeRecord> parse_records_jsonl(std::string_view text) {
  std::vector<KnowledgeRecord> records;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") != std::string_view::npos) {
      KnowledgeRecord r = record_from_json(parse_json(line));
      if (r.prompt.empty() || r.domain.empty()) {
        throw Error(ErrorCode::MalformedRecord, "record needs a non-empty prompt and domain");
      }
      records.push_back(std::move(r));
    }
    start = end + 1;
  }
  return records;
}

std::vector<KnowledgeRecord> read_records_jsonl(std::istream& in) {
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_records_jsonl(ss.str());
}

std::map<std::string, double> domain_distribution(std::span<const RetrievalLogEntry> log) {
  if (log.empty()) throw Error(ErrorCode::EmptyLog, "retrieval log is empty");
  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& entry : log) {
    for (const auto& d : entry.returned_domains) {
      ++counts[d];
      ++total;
    }
  }
  if (total == 0) throw Error(ErrorCode::EmptyLog, "retrieval log returned no samples");
  std::map<std::string, double> out;
  for (const auto& [domain, c] : counts) {
    out[domain] = static_cast<double>(c) / static_cast<double>(total);
  }
  return out;
}

}  // namespace rttc::kb
