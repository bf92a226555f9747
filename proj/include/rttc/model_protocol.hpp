#pragma once

// Model wire protocol (JSON over HTTP):
//   POST /generate {"base_id", "adapter_digest": null|"...", "context"} -> {"text", "produced_by"}
//   POST /score    {"query": Query, "response": Response}              -> {"value"}
//   POST /embed    {"text"}                                            -> {"embedding": [...]}
//   POST /train    {"base_id", "samples": [{"sample_id", "prompt", "completion"}], "hyper"}
//                                                                      -> {"adapter_digest"}
// ModelProtocolHandler answers these requests from in-process capabilities;
// RemoteModelBackend is the client side and implements every capability.

#include <chrono>
#include <map>
#include <mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "rttc/http_service.hpp"
#include "rttc/model_gateway.hpp"

namespace rttc::model {

using nlohmann::json;

class ModelProtocolHandler {
 public:
  ModelProtocolHandler(const Generator& generator, const Scorer& scorer, const Embedder& embedder,
                       const Trainer& trainer);

  json generate(const json& request);
  json score(const json& request);
  json embed(const json& request);
  json train(const json& request);

  // Routes "/generate", "/score", "/embed" or "/train". InvalidArgument otherwise.
  json dispatch(std::string_view endpoint, const json& request);

  void mount(http::JsonService& service);

 private:
  const Generator& generator_;
  const Scorer& scorer_;
  const Embedder& embedder_;
  const Trainer& trainer_;

  // Adapters trained through this handler, keyed by digest; /generate can
  // only refer to these.
  std::mutex adapters_mutex_;
  std::map<std::string, AdapterState, std::less<>> adapters_;
};

class RemoteModelBackend final : public Generator, public Scorer, public Embedder, public Trainer {
 public:
  RemoteModelBackend(std::string base_url, std::size_t expected_dim,
                     std::chrono::milliseconds timeout = std::chrono::seconds(30));

  Response generate(const ModelHandle& handle, std::string_view context) const override;
  RewardScore score(const Query& query, const Response& response) const override;
  Embedding embed(std::string_view text) const override;
  std::size_t dim() const override { return expected_dim_; }
  AdapterState train(const ModelHandle& base, const RetrievedSet& samples,
                     const TrainHyper& hyper) const override;

 private:
  http::JsonClient client_;
  std::size_t expected_dim_;
};

}  // namespace rttc::model
