#include "rttc/synthetic_corpus.hpp"

#include "rttc/error.hpp"

namespace rttc::kb {

std::string domain_word(std::string_view domain, std::size_t index) {
  return std::string(domain) + std::to_string(index);
}

std::string domain_sentence(std::string_view domain, std::size_t vocabulary, std::size_t words,
                            std::mt19937_64& rng) {
  std::string out;
  for (std::size_t w = 0; w < words; ++w) {
    if (w > 0) out += ' ';
    out += domain_word(domain, static_cast<std::size_t>(rng() % vocabulary));
  }
  return out;
}

std::vector<KnowledgeRecord> synthetic_corpus(const SyntheticCorpusSpec& spec) {
  if (spec.domains.empty() || spec.vocabulary_per_domain == 0 || spec.words_per_prompt == 0) {
    throw Error(ErrorCode::ConfigError, "synthetic corpus needs domains, vocabulary and words");
  }
  std::mt19937_64 rng(spec.seed);
  std::vector<KnowledgeRecord> records;
  records.reserve(spec.domains.size() * spec.samples_per_domain);
  for (std::size_t i = 0; i < spec.samples_per_domain; ++i) {
    for (const auto& domain : spec.domains) {
      KnowledgeRecord r;
      r.prompt = domain_sentence(domain, spec.vocabulary_per_domain, spec.words_per_prompt, rng);
      r.completion = "solution " + domain + " " + std::to_string(i);
      r.domain = domain;
      records.push_back(std::move(r));
    }
  }
  return records;
}

namespace {

std::size_t count_field(const nlohmann::json& value, const std::string& key) {
  if (!value.is_number_integer() || (!value.is_number_unsigned() && value.get<std::int64_t>() < 0)) {
    throw Error(ErrorCode::ConfigError, "synthetic." + key + " must be a non-negative integer");
  }
  return value.get<std::size_t>();
}

}  // namespace

SyntheticCorpusSpec synthetic_spec_from_json(const nlohmann::json& j, std::uint64_t seed) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "synthetic must be an object");
  SyntheticCorpusSpec spec;
  spec.seed = seed;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "domains") {
        spec.domains = value.get<std::vector<std::string>>();
      } else if (key == "samples_per_domain") {
        spec.samples_per_domain = count_field(value, key);
      } else if (key == "vocabulary_per_domain") {
        spec.vocabulary_per_domain = count_field(value, key);
      } else if (key == "words_per_prompt") {
        spec.words_per_prompt = count_field(value, key);
      } else {
        throw Error(ErrorCode::ConfigError, "unknown key synthetic." + key);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("synthetic: ") + e.what());
  }
  return spec;
}

}  // namespace rttc::kb
