#include "rttc/simulated_models.hpp"

#include <algorithm>

#include "rttc/error.hpp"

namespace rttc::model {

using nlohmann::json;

namespace {

constexpr std::string_view kQueryHeader = "### Query\n";

bool is_token_byte(unsigned char c) {
  if (c >= 0x80) return true;
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

// Cuts at most `max_bytes` without splitting a UTF-8 sequence.
std::string_view utf8_prefix(std::string_view s, std::size_t max_bytes) {
  if (s.size() <= max_bytes) return s;
  std::size_t cut = max_bytes;
  while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;
  return s.substr(0, cut);
}

std::string_view query_part(std::string_view context) {
  if (!context.starts_with(kAugmentationMarker)) return context;
  const auto pos = context.rfind(kQueryHeader);
  if (pos == std::string_view::npos) return context;
  return context.substr(pos + kQueryHeader.size());
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (is_token_byte(c)) {
      current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a')
                                             : static_cast<char>(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Response SimulatedGenerator::generate(const ModelHandle& handle, std::string_view context) const {
  if (context.empty()) throw Error(ErrorCode::InvalidArgument, "empty context");
  Response r;
  if (handle.adapter) {
    if (handle.adapter->base_id != handle.base_id) {
      throw Error(ErrorCode::InvalidArgument, "adapter was trained for a different base model");
    }
    r.produced_by = ProducedBy::Ttt;
    r.adapter_digest = handle.adapter->digest;
  } else if (context.starts_with(kAugmentationMarker)) {
    r.produced_by = ProducedBy::Rag;
  } else {
    r.produced_by = ProducedBy::Direct;
  }
  std::string tag(to_string(r.produced_by));
  if (r.adapter_digest) tag += "|" + *r.adapter_digest;
  r.text = "[" + tag + "] answer(" +
           std::string(utf8_prefix(query_part(context), kExcerptBytes)) + ")";
  return r;
}

RewardScript& RewardScript::set(std::string query_id, ProducedBy produced_by, double value) {
  table_[{std::move(query_id), produced_by}] = value;
  return *this;
}

double RewardScript::lookup(std::string_view query_id, ProducedBy produced_by) const {
  const auto it = table_.find(std::pair<std::string, ProducedBy>{std::string(query_id), produced_by});
  return it == table_.end() ? default_ : it->second;
}

RewardScript RewardScript::from_json(const json& j) {
  try {
    RewardScript script(j.value("default", 1.0));
    for (const auto& e : j.value("entries", json::array())) {
      script.set(e.at("query_id").get<std::string>(),
                 produced_by_from_string(e.at("produced_by").get<std::string>()),
                 e.at("value").get<double>());
    }
    return script;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("reward script: ") + e.what());
  }
}

json RewardScript::to_json() const {
  json entries = json::array();
  for (const auto& [key, value] : table_) {
    entries.push_back(
        {{"query_id", key.first}, {"produced_by", rttc::to_string(key.second)}, {"value", value}});
  }
  return json{{"default", default_}, {"entries", std::move(entries)}};
}

RewardScore SimulatedScorer::score(const Query& query, const Response& response) const {
  return RewardScore(script_.lookup(query.id, response.produced_by));
}

FeatureHashEmbedder::FeatureHashEmbedder(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw Error(ErrorCode::ConfigError, "embedding dim must be positive");
}

Embedding FeatureHashEmbedder::embed(std::string_view text) const {
  if (text.empty()) throw Error(ErrorCode::EmptyText, "cannot embed empty text");
  const auto tokens = tokenize(text);
  if (tokens.empty()) throw Error(ErrorCode::EmptyText, "text has no tokens");
  std::vector<double> raw(dim_, 0.0);
  for (const auto& t : tokens) {
    const std::uint64_t h = fnv1a64(t);
    raw[h % dim_] += (h >> 63) ? -1.0 : 1.0;
  }
  if (std::all_of(raw.begin(), raw.end(), [](double v) { return v == 0.0; })) {
    // Every token cancelled against a colliding opposite-signed token.
    throw Error(ErrorCode::EmptyText, "token features cancel to zero");
  }
  return normalize(raw);
}

AdapterState SimulatedTrainer::train(const ModelHandle& base, const RetrievedSet& samples,
                                     const TrainHyper& hyper) const {
  if (base.adapter) {
    throw Error(ErrorCode::InvalidArgument, "training must start from the base model");
  }
  if (samples.empty()) throw Error(ErrorCode::EmptySampleSet, "no samples to train on");
  AdapterState state;
  state.trained_on = samples.sample_ids();
  std::sort(state.trained_on.begin(), state.trained_on.end());
  state.digest = adapter_digest(state.trained_on, hyper);
  state.base_id = base.base_id;
  state.hyper = hyper;
  return state;
}

}  // namespace rttc::model
