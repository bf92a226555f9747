#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rttc/model_gateway.hpp"
#include "rttc/types.hpp"

namespace rttc::kb {

struct KnowledgeRecord {
  std::string prompt;
  std::string completion;
  std::string domain;
};

// Flat multi-domain knowledge base with exact inner-product search.
//
// Only prompts are embedded. Samples keep insertion order, and sample ids are
// assigned from that order ("kb-000000", "kb-000001", ...). On disk a base is
// a directory holding samples.jsonl (one KnowledgeSample per line) and
// manifest.json ({"format", "dim", "total", "domains", "digest"}), where
// digest is the SHA-256 of samples.jsonl.
class KnowledgeBase {
 public:
  explicit KnowledgeBase(std::size_t dim);

  // Embeds and appends every record, or nothing: a MalformedRecord (empty
  // prompt or domain) or DimMismatch leaves the base untouched.
  std::size_t ingest(std::span<const KnowledgeRecord> records, const model::Embedder& embedder);

  // The min(k, size()) samples with the largest inner product against
  // `query`, highest first; equal similarities keep insertion order.
  RetrievedSet retrieve_top_k(const Embedding& query, int k) const;

  std::size_t size() const noexcept { return samples_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<KnowledgeSample>& samples() const noexcept { return samples_; }
  const std::map<std::string, std::size_t>& domain_counts() const noexcept { return domain_counts_; }

  void save(const std::filesystem::path& dir) const;
  // ParseError on a corrupt or inconsistent directory, IoError if unreadable.
  static KnowledgeBase load(const std::filesystem::path& dir);

 private:
  void append(KnowledgeSample sample);

  std::size_t dim_;
  std::vector<KnowledgeSample> samples_;
  std::vector<double> matrix_;  // row-major copy of the embeddings
  std::map<std::string, std::size_t> domain_counts_;
};

// Reads {"prompt", "completion", "domain"} lines; blank lines are skipped.
// ParseError on malformed JSON, MalformedRecord on empty prompt/domain.
std::vector<KnowledgeRecord> read_records_jsonl(std::istream& in);
std::vector<KnowledgeRecord> parse_records_jsonl(std::string_view text);

struct RetrievalLogEntry {
  std::string query_id;
  int k = 0;
  std::vector<std::string> returned_domains;
  std::uint64_t timestamp = 0;
};

// Fraction of all returned samples per domain. EmptyLog if `log` is empty or
// returned nothing at all.
std::map<std::string, double> domain_distribution(std::span<const RetrievalLogEntry> log);

}  // namespace rttc::kb
