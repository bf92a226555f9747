#pragma once

// Canonical JSON encodings for the core types. Field names are part of the
// wire protocols (knowledge-base service, model protocol) and of every file
// format, so they must not change.

#include <nlohmann/json.hpp>

#include "rttc/error.hpp"
#include "rttc/types.hpp"

namespace rttc {

using json = nlohmann::json;

void to_json(json& j, const Query& q);
void from_json(const json& j, Query& q);

void to_json(json& j, const Response& r);
void from_json(const json& j, Response& r);

void to_json(json& j, const RetrievedSample& s);
void from_json(const json& j, RetrievedSample& s);

void to_json(json& j, const RetrievedSet& s);
void from_json(const json& j, RetrievedSet& s);

void to_json(json& j, const KnowledgeSample& s);
KnowledgeSample knowledge_sample_from_json(const json& j);

// Converts any nlohmann parse/type error into rttc::Error(ParseError).
template <typename T>
T decode(const json& j) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

json parse_json(std::string_view text);

}  // namespace rttc

namespace nlohmann {

template <>
struct adl_serializer<rttc::Embedding> {
  static void to_json(json& j, const rttc::Embedding& e);
  static rttc::Embedding from_json(const json& j);
};

}  // namespace nlohmann
