#include "rttc/json_codec.hpp"

namespace rttc {

void to_json(json& j, const Query& q) {
  j = json{{"id", q.id}, {"text", q.text}};
  if (q.domain_hint) j["domain_hint"] = *q.domain_hint;
}

void from_json(const json& j, Query& q) {
  j.at("id").get_to(q.id);
  j.at("text").get_to(q.text);
  q.domain_hint.reset();
  if (auto it = j.find("domain_hint"); it != j.end() && !it->is_null()) {
    q.domain_hint = it->get<std::string>();
  }
}

void to_json(json& j, const Response& r) {
  j = json{{"text", r.text}, {"produced_by", to_string(r.produced_by)}};
  j["adapter_digest"] = r.adapter_digest ? json(*r.adapter_digest) : json(nullptr);
}

void from_json(const json& j, Response& r) {
  j.at("text").get_to(r.text);
  r.produced_by = produced_by_from_string(j.at("produced_by").get<std::string>());
  r.adapter_digest.reset();
  if (auto it = j.find("adapter_digest"); it != j.end() && !it->is_null()) {
    r.adapter_digest = it->get<std::string>();
  }
}

void to_json(json& j, const RetrievedSample& s) {
  j = json{{"sample_id", s.sample_id},
           {"prompt", s.prompt},
           {"completion", s.completion},
           {"domain", s.domain},
           {"similarity", s.similarity}};
}

void from_json(const json& j, RetrievedSample& s) {
  j.at("sample_id").get_to(s.sample_id);
  j.at("prompt").get_to(s.prompt);
  j.at("completion").get_to(s.completion);
  j.at("domain").get_to(s.domain);
  j.at("similarity").get_to(s.similarity);
}

void to_json(json& j, const RetrievedSet& s) {
  j = json{{"samples", s.samples}, {"k_requested", s.k_requested}};
}

void from_json(const json& j, RetrievedSet& s) {
  j.at("samples").get_to(s.samples);
  j.at("k_requested").get_to(s.k_requested);
}

void to_json(json& j, const KnowledgeSample& s) {
  j = json{{"sample_id", s.sample_id},
           {"prompt", s.prompt},
           {"completion", s.completion},
           {"domain", s.domain},
           {"embedding", s.embedding}};
}

KnowledgeSample knowledge_sample_from_json(const json& j) {
  try {
    return KnowledgeSample{j.at("sample_id").get<std::string>(),
                           j.at("prompt").get<std::string>(),
                           j.at("completion").get<std::string>(),
                           j.at("domain").get<std::string>(),
                           j.at("embedding").get<Embedding>()};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

}  // namespace rttc

namespace nlohmann {

void adl_serializer<rttc::Embedding>::to_json(json& j, const rttc::Embedding& e) {
  j = json::array();
  for (double v : e.values()) j.push_back(v);
}

rttc::Embedding adl_serializer<rttc::Embedding>::from_json(const json& j) {
  if (!j.is_array()) throw rttc::Error(rttc::ErrorCode::ParseError, "embedding must be an array");
  std::vector<double> values;
  values.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) {
      throw rttc::Error(rttc::ErrorCode::ParseError, "embedding entries must be numbers");
    }
    values.push_back(v.get<double>());
  }
  return rttc::Embedding::from_values(std::move(values));
}

}  // namespace nlohmann
