#include "rttc/model_gateway.hpp"

#include <algorithm>

#include "rttc/digest.hpp"
#include "rttc/error.hpp"

namespace rttc::model {

using nlohmann::json;

void validate(const TrainHyper& hyper) {
  if (hyper.epochs <= 0 || hyper.batch_size <= 0 || hyper.lora_rank <= 0 ||
      hyper.lora_alpha <= 0 || !(hyper.learning_rate > 0.0)) {
    throw Error(ErrorCode::ConfigError, "train hyperparameters must all be positive");
  }
  if (hyper.target_layers.empty()) {
    throw Error(ErrorCode::ConfigError, "target_layers must not be empty");
  }
}

std::string adapter_digest(std::vector<std::string> sample_ids, const TrainHyper& hyper) {
  std::sort(sample_ids.begin(), sample_ids.end());
  // json objects keep keys sorted and doubles print shortest-roundtrip, so the
  // serialized form is identical on every platform.
  const json canonical{{"hyper", hyper}, {"trained_on", sample_ids}};
  return sha256_hex(canonical.dump());
}

void to_json(json& j, const TrainHyper& h) {
  j = json{{"epochs", h.epochs},       {"learning_rate", h.learning_rate},
           {"batch_size", h.batch_size}, {"lora_rank", h.lora_rank},
           {"lora_alpha", h.lora_alpha}, {"target_layers", h.target_layers}};
}

void from_json(const json& j, TrainHyper& h) {
  const TrainHyper defaults;
  h.epochs = j.value("epochs", defaults.epochs);
  h.learning_rate = j.value("learning_rate", defaults.learning_rate);
  h.batch_size = j.value("batch_size", defaults.batch_size);
  h.lora_rank = j.value("lora_rank", defaults.lora_rank);
  h.lora_alpha = j.value("lora_alpha", defaults.lora_alpha);
  h.target_layers = j.value("target_layers", defaults.target_layers);
}

void to_json(json& j, const AdapterState& a) {
  j = json{{"digest", a.digest},
           {"base_id", a.base_id},
           {"trained_on", a.trained_on},
           {"hyper", a.hyper}};
}

void from_json(const json& j, AdapterState& a) {
  j.at("digest").get_to(a.digest);
  j.at("base_id").get_to(a.base_id);
  j.at("trained_on").get_to(a.trained_on);
  j.at("hyper").get_to(a.hyper);
}

}  // namespace rttc::model
