#pragma once

#include "grouprl/rng.hpp"
#include "grouprl/rewards.hpp"
#include "grouprl/vocab.hpp"

#include <string>
#include <vector>

namespace grouprl {

// A six-option MCQ whose ground truth is the strict-majority prompt symbol,
// mapped through the fixed bijection A<->S0 ... F<->S5. Solvable from the
// prompt-count feature block alone.
struct McqItem {
  std::string id;
  TokenSeq prompt;         // PROMPT_SYMBOL tokens only
  int answer_option = -1;  // 0..5
  std::string stratum;

  char answer_letter() const { return option_letter(answer_option); }
};

// Draws n symbols with one designated symbol boosted so a unique majority
// exists; redraws from the same stream on ties. Deterministic per stream.
McqItem generate_item(const Vocabulary& vocab, RngStream& rng, int n, const std::string& stratum,
                      const std::string& id);

// Convenience: items with ids "item-<k>" and strata cycling over
// sf0..sf<strata_count-1>.
std::vector<McqItem> generate_dataset(const Vocabulary& vocab, uint64_t seed, int count,
                                      int prompt_len, int strata_count = 6);

bool is_equivalent(const Vocabulary& vocab, int answer_option, const TokenSeq& response);

// JSON-lines dataset file with a self-describing header line. Writing then
// reading yields a field-by-field equal list.
void save_dataset(const std::string& path, const Vocabulary& vocab,
                  const std::vector<McqItem>& items);
std::vector<McqItem> load_dataset(const std::string& path, const Vocabulary& vocab);

}  // namespace grouprl
