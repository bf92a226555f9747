#include "rttc/kb_service.hpp"

#include "rttc/error.hpp"
#include "rttc/json_codec.hpp"

namespace rttc::kb {

KbService::KbService(KnowledgeBase base, std::shared_ptr<const model::Embedder> embedder)
    : snapshot_(std::make_shared<const KnowledgeBase>(std::move(base))),
      embedder_(std::move(embedder)) {}

std::shared_ptr<const KnowledgeBase> KbService::snapshot() const {
  std::lock_guard lock(snapshot_mutex_);
  return snapshot_;
}

RetrievedSet KbService::retrieve(const Embedding& query, int k, std::string_view query_id) {
  RetrievedSet result = snapshot()->retrieve_top_k(query, k);
  RetrievalLogEntry entry;
  entry.query_id = std::string(query_id);
  entry.k = k;
  for (const auto& s : result.samples) entry.returned_domains.push_back(s.domain);
  std::lock_guard lock(log_mutex_);
  entry.timestamp = tick_++;
  log_.push_back(std::move(entry));
  return result;
}

std::size_t KbService::ingest(std::span<const KnowledgeRecord> records) {
  if (!embedder_) throw Error(ErrorCode::ConfigError, "service has no embedder for ingestion");
  std::lock_guard exclusive(ingest_mutex_);
  auto next = std::make_shared<KnowledgeBase>(*snapshot());
  const std::size_t n = next->ingest(records, *embedder_);
  std::lock_guard lock(snapshot_mutex_);
  snapshot_ = std::move(next);
  return n;
}

std::vector<RetrievalLogEntry> KbService::log() const {
  std::lock_guard lock(log_mutex_);
  return log_;
}

void KbService::mount(http::JsonService& service) {
  service.post_json("/retrieve", [this](const json& req) {
    if (!req.is_object() || !req.contains("embedding") || !req.contains("k")) {
      throw Error(ErrorCode::ParseError, "expected {\"embedding\": [...], \"k\": <int>}");
    }
    if (!req.at("k").is_number_integer()) throw Error(ErrorCode::InvalidArgument, "k must be an integer");
    const auto e = decode<Embedding>(req.at("embedding"));
    const std::string query_id = req.value("query_id", std::string());
    return json(retrieve(e, req.at("k").get<int>(), query_id));
  });
  service.post_body("/ingest", [this](std::string_view body) {
    const auto records = parse_records_jsonl(body);
    return json{{"ingested", ingest(records)}};
  });
  service.get("/stats", [this] {
    const auto snap = snapshot();
    return json{{"total", snap->size()}, {"dim", snap->dim()}, {"domains", snap->domain_counts()}};
  });
}

RemoteRetriever::RemoteRetriever(std::string base_url, std::chrono::milliseconds timeout)
    : client_(std::move(base_url), timeout) {}

RetrievedSet RemoteRetriever::retrieve(const Embedding& query, int k, std::string_view query_id) {
  const json reply =
      client_.post("/retrieve", json{{"embedding", query}, {"k", k}, {"query_id", query_id}});
  auto set = decode<RetrievedSet>(reply);
  if (!is_well_formed(set)) throw Error(ErrorCode::BackendUnavailable, "malformed retrieval reply");
  return set;
}

json RemoteRetriever::stats() const { return client_.get("/stats"); }

}  // namespace rttc::kb
