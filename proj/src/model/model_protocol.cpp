#include "rttc/model_protocol.hpp"

#include <algorithm>

#include "rttc/error.hpp"
#include "rttc/json_codec.hpp"

namespace rttc::model {

namespace {

const json& require(const json& request, const char* key) {
  if (!request.is_object() || !request.contains(key)) {
    throw Error(ErrorCode::ParseError, std::string("missing field '") + key + "'");
  }
  return request.at(key);
}

std::string require_string(const json& request, const char* key) {
  const json& v = require(request, key);
  if (!v.is_string()) throw Error(ErrorCode::ParseError, std::string(key) + " must be a string");
  return v.get<std::string>();
}

}  // namespace

ModelProtocolHandler::ModelProtocolHandler(const Generator& generator, const Scorer& scorer,
                                           const Embedder& embedder, const Trainer& trainer)
    : generator_(generator), scorer_(scorer), embedder_(embedder), trainer_(trainer) {}

json ModelProtocolHandler::generate(const json& request) {
  ModelHandle handle{require_string(request, "base_id"), std::nullopt};
  const std::string context = require_string(request, "context");
  if (context.empty()) throw Error(ErrorCode::InvalidArgument, "context must not be empty");
  const json& digest = require(request, "adapter_digest");
  if (!digest.is_null()) {
    std::lock_guard lock(adapters_mutex_);
    const auto it = adapters_.find(digest.get<std::string>());
    if (it == adapters_.end()) {
      throw Error(ErrorCode::InvalidArgument, "unknown adapter " + digest.get<std::string>());
    }
    handle.adapter = it->second;
  }
  const Response r = generator_.generate(handle, context);
  return json{{"text", r.text}, {"produced_by", to_string(r.produced_by)}};
}

json ModelProtocolHandler::score(const json& request) {
  const auto query = decode<Query>(require(request, "query"));
  const auto response = decode<Response>(require(request, "response"));
  validate(response);
  return json{{"value", scorer_.score(query, response).value()}};
}

json ModelProtocolHandler::embed(const json& request) {
  const Embedding e = embedder_.embed(require_string(request, "text"));
  return json{{"embedding", e}};
}

json ModelProtocolHandler::train(const json& request) {
  const ModelHandle base{require_string(request, "base_id"), std::nullopt};
  const auto hyper = decode<TrainHyper>(require(request, "hyper"));
  validate(hyper);
  RetrievedSet samples;
  for (const auto& s : require(request, "samples")) {
    RetrievedSample sample;
    sample.sample_id = require_string(s, "sample_id");
    sample.prompt = require_string(s, "prompt");
    sample.completion = require_string(s, "completion");
    samples.samples.push_back(std::move(sample));
  }
  samples.k_requested = static_cast<int>(samples.samples.size());
  AdapterState state = trainer_.train(base, samples, hyper);
  const std::string digest = state.digest;
  {
    std::lock_guard lock(adapters_mutex_);
    adapters_.insert_or_assign(digest, std::move(state));
  }
  return json{{"adapter_digest", digest}};
}

json ModelProtocolHandler::dispatch(std::string_view endpoint, const json& request) {
  if (endpoint == "/generate") return generate(request);
  if (endpoint == "/score") return score(request);
  if (endpoint == "/embed") return embed(request);
  if (endpoint == "/train") return train(request);
  throw Error(ErrorCode::InvalidArgument, "unknown endpoint " + std::string(endpoint));
}

void ModelProtocolHandler::mount(http::JsonService& service) {
  for (const char* endpoint : {"/generate", "/score", "/embed", "/train"}) {
    service.post_json(endpoint, [this, endpoint](const json& req) { return dispatch(endpoint, req); });
  }
}

RemoteModelBackend::RemoteModelBackend(std::string base_url, std::size_t expected_dim,
                                       std::chrono::milliseconds timeout)
    : client_(std::move(base_url), timeout), expected_dim_(expected_dim) {}

Response RemoteModelBackend::generate(const ModelHandle& handle, std::string_view context) const {
  json request{{"base_id", handle.base_id}, {"context", context}};
  request["adapter_digest"] = handle.adapter ? json(handle.adapter->digest) : json(nullptr);
  const json reply = client_.post("/generate", request);
  Response r;
  try {
    r.text = reply.at("text").get<std::string>();
    r.produced_by = produced_by_from_string(reply.at("produced_by").get<std::string>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BackendUnavailable, std::string("bad /generate reply: ") + e.what());
  }
  if (r.produced_by == ProducedBy::Ttt) {
    if (!handle.adapter) {
      throw Error(ErrorCode::BackendUnavailable, "backend reported Ttt without an adapter");
    }
    r.adapter_digest = handle.adapter->digest;
  }
  return r;
}

RewardScore RemoteModelBackend::score(const Query& query, const Response& response) const {
  const json reply = client_.post("/score", json{{"query", query}, {"response", response}});
  const auto it = reply.find("value");
  if (it == reply.end() || !it->is_number()) {
    throw Error(ErrorCode::BackendUnavailable, "bad /score reply");
  }
  return RewardScore(it->get<double>());
}

Embedding RemoteModelBackend::embed(std::string_view text) const {
  if (text.empty()) throw Error(ErrorCode::EmptyText, "cannot embed empty text");
  const json reply = client_.post("/embed", json{{"text", text}});
  const auto it = reply.find("embedding");
  if (it == reply.end()) throw Error(ErrorCode::BackendUnavailable, "bad /embed reply");
  Embedding e = decode<Embedding>(*it);
  if (e.dim() != expected_dim_) {
    throw Error(ErrorCode::DimMismatch, "backend returned dim " + std::to_string(e.dim()) +
                                            ", expected " + std::to_string(expected_dim_));
  }
  return e;
}

AdapterState RemoteModelBackend::train(const ModelHandle& base, const RetrievedSet& samples,
                                       const TrainHyper& hyper) const {
  if (base.adapter) {
    throw Error(ErrorCode::InvalidArgument, "training must start from the base model");
  }
  if (samples.empty()) throw Error(ErrorCode::EmptySampleSet, "no samples to train on");
  json wire = json::array();
  for (const auto& s : samples.samples) {
    wire.push_back({{"sample_id", s.sample_id}, {"prompt", s.prompt}, {"completion", s.completion}});
  }
  const json reply =
      client_.post("/train", json{{"base_id", base.base_id}, {"samples", wire}, {"hyper", hyper}});
  const auto it = reply.find("adapter_digest");
  if (it == reply.end() || !it->is_string()) {
    throw Error(ErrorCode::BackendUnavailable, "bad /train reply");
  }
  AdapterState state;
  state.digest = it->get<std::string>();
  state.base_id = base.base_id;
  state.trained_on = samples.sample_ids();
  std::sort(state.trained_on.begin(), state.trained_on.end());
  state.hyper = hyper;
  return state;
}

}  // namespace rttc::model
