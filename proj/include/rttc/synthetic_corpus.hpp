#pragma once

// Seeded generator for a multi-domain corpus with disjoint per-domain
// vocabularies, used by the simulated backends and the scenario tests.
// Randomness comes from std::mt19937_64 with modulo reduction only, so a seed
// yields the same corpus on every standard library.

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rttc/knowledge_base.hpp"

namespace rttc::kb {

struct SyntheticCorpusSpec {
  std::vector<std::string> domains{"coding", "math", "medical"};
  std::size_t samples_per_domain = 200;
  std::size_t vocabulary_per_domain = 40;
  std::size_t words_per_prompt = 8;
  std::uint64_t seed = 0;
};

// "<domain><index>", e.g. "math17".
std::string domain_word(std::string_view domain, std::size_t index);

// `words` distinct-position draws from the domain's vocabulary, space separated.
std::string domain_sentence(std::string_view domain, std::size_t vocabulary, std::size_t words,
                            std::mt19937_64& rng);

std::vector<KnowledgeRecord> synthetic_corpus(const SyntheticCorpusSpec& spec);

// Reads the "synthetic" config block; unknown keys are a ConfigError.
SyntheticCorpusSpec synthetic_spec_from_json(const nlohmann::json& j, std::uint64_t seed);

}  // namespace rttc::kb
