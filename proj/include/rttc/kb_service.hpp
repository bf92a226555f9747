#pragma once

// Retrieval endpoints of the knowledge-base server:
//   POST /retrieve {"embedding": [...], "k": <int>, "query_id"?: <string>}
//        -> {"samples": [{"sample_id","prompt","completion","domain","similarity"}], "k_requested"}
//   POST /ingest   JSONL of {"prompt","completion","domain"} -> {"ingested": <int>}
//   GET  /stats    -> {"total", "dim", "domains": {"<name>": <int>}}

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rttc/http_service.hpp"
#include "rttc/knowledge_base.hpp"
#include "rttc/model_gateway.hpp"

namespace rttc::kb {

// Anything that can turn an embedding into a RetrievedSet. Exact top-k is the
// only strategy shipped; others (diversity-aware selection and the like) plug
// in here.
class Retriever {
 public:
  virtual ~Retriever() = default;
  virtual RetrievedSet retrieve(const Embedding& query, int k, std::string_view query_id) = 0;
};

// In-process service: concurrent retrievals run against an immutable
// snapshot; ingestion builds a new base and swaps it in.
class KbService final : public Retriever {
 public:
  // `embedder` is only needed for ingestion.
  explicit KbService(KnowledgeBase base,
                     std::shared_ptr<const model::Embedder> embedder = nullptr);

  std::shared_ptr<const KnowledgeBase> snapshot() const;

  RetrievedSet retrieve(const Embedding& query, int k, std::string_view query_id) override;
  std::size_t ingest(std::span<const KnowledgeRecord> records);

  std::vector<RetrievalLogEntry> log() const;

  // Registers /retrieve, /ingest and /stats on `service`.
  void mount(http::JsonService& service);

 private:
  mutable std::mutex snapshot_mutex_;
  std::shared_ptr<const KnowledgeBase> snapshot_;
  std::mutex ingest_mutex_;
  std::shared_ptr<const model::Embedder> embedder_;

  mutable std::mutex log_mutex_;
  std::vector<RetrievalLogEntry> log_;
  std::uint64_t tick_ = 0;
};

class RemoteRetriever final : public Retriever {
 public:
  explicit RemoteRetriever(std::string base_url,
                           std::chrono::milliseconds timeout = std::chrono::seconds(30));

  RetrievedSet retrieve(const Embedding& query, int k, std::string_view query_id) override;
  nlohmann::json stats() const;

 private:
  http::JsonClient client_;
};

}  // namespace rttc::kb
