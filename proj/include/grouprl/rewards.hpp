#pragma once

#include "grouprl/vocab.hpp"

#include <span>

namespace grouprl {

struct RewardBreakdown {
  int fmt = 0;               // 0 or 1
  int acc = 0;               // 0 or 1
  double len_penalty = 0.0;  // in [-1, 0]
  double combined = 0.0;
};

struct AnswerExtraction {
  bool found = false;
  int option_index = -1;  // 0..5 when found

  char letter() const { return option_letter(option_index); }
};

// 1 iff, ignoring a single trailing EOS, the sequence reads exactly
//   THINK_OPEN (non-tag tokens)* THINK_CLOSE ANS_OPEN (non-tag tokens)* ANS_CLOSE
// with each tag occurring exactly once and nothing before or after.
int format_reward(const Vocabulary& vocab, const TokenSeq& seq);
int format_reward_roles(std::span<const TokenRole> roles);

// First ANS_OPEN paired with the first ANS_CLOSE after it; found iff that
// span holds exactly one token and it is an option. Tolerates malformed
// sequences so the accuracy component stays computable when fmt = 0.
AnswerExtraction extract_answer(const Vocabulary& vocab, const TokenSeq& seq);

int accuracy_reward(const AnswerExtraction& extracted, int ground_truth_option);

// Soft overlong punishment:
//   0                                  len <= L_max - L_cache
//   ((L_max - L_cache) - len)/L_cache  L_max - L_cache < len <= L_max
//   -1                                 len > L_max
// Requires 0 < L_cache < L_max.
double length_penalty(int len, int l_max, int l_cache);

// Gated combiner: 0.1*fmt + 0.9*acc when both are 1, otherwise 0.
double grpo_combine(int fmt, int acc);

// Gated combiner: 0.5*acc + 0.5*len_pen when acc = 1 and the length penalty
// is zero, otherwise -1.
double dapo_combine(int acc, double len_pen);

enum class Algorithm { kGrpo, kDapo };

RewardBreakdown score_response(const Vocabulary& vocab, const TokenSeq& response,
                               int ground_truth_option, Algorithm algorithm, int l_max,
                               int l_cache);

}  // namespace grouprl
