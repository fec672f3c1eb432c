#include "grouprl/rewards.hpp"

#include "grouprl/errors.hpp"

#include <string>
#include <vector>

namespace grouprl {

int format_reward_roles(std::span<const TokenRole> roles) {
  size_t n = roles.size();
  if (n > 0 && roles[n - 1] == TokenRole::kEos) --n;  // single trailing EOS is termination, not content

  // Linear scan automaton over THINK_OPEN body THINK_CLOSE ANS_OPEN body ANS_CLOSE.
  if (n < 4) return 0;
  if (roles[0] != TokenRole::kThinkOpen) return 0;
  size_t i = 1;
  while (i < n && !is_tag_role(roles[i])) ++i;
  if (i >= n || roles[i] != TokenRole::kThinkClose) return 0;
  ++i;
  if (i >= n || roles[i] != TokenRole::kAnsOpen) return 0;
  ++i;
  while (i < n && !is_tag_role(roles[i])) ++i;
  if (i >= n || roles[i] != TokenRole::kAnsClose) return 0;
  return i == n - 1 ? 1 : 0;
}

int format_reward(const Vocabulary& vocab, const TokenSeq& seq) {
  std::vector<TokenRole> roles;
  roles.reserve(seq.ids.size());
  for (TokenId id : seq.ids) roles.push_back(vocab.token(id).role);
  return format_reward_roles(roles);
}

AnswerExtraction extract_answer(const Vocabulary& vocab, const TokenSeq& seq) {
  int open = -1;
  int close = -1;
  for (int i = 0; i < seq.length(); ++i) {
    TokenRole r = vocab.token(seq.ids[static_cast<size_t>(i)]).role;
    if (open < 0 && r == TokenRole::kAnsOpen) {
      open = i;
    } else if (open >= 0 && r == TokenRole::kAnsClose) {
      close = i;
      break;
    }
  }
  if (open < 0 || close < 0) return {};
  if (close - open != 2) return {};  // span must hold exactly one token
  const Token& t = vocab.token(seq.ids[static_cast<size_t>(open + 1)]);
  if (t.role != TokenRole::kOption) return {};
  return {true, t.arg};
}

int accuracy_reward(const AnswerExtraction& extracted, int ground_truth_option) {
  if (ground_truth_option < 0 || ground_truth_option >= kNumOptions)
    throw ContractViolation("accuracy_reward: ground truth option out of range");
  return extracted.found && extracted.option_index == ground_truth_option ? 1 : 0;
}

double length_penalty(int len, int l_max, int l_cache) {
  if (!(0 < l_cache && l_cache < l_max))
    throw ConfigError("length_penalty requires 0 < L_cache < L_max, got L_max=" +
                      std::to_string(l_max) + " L_cache=" + std::to_string(l_cache));
  if (len <= l_max - l_cache) return 0.0;
  if (len <= l_max) return (static_cast<double>(l_max - l_cache) - len) / l_cache;
  return -1.0;
}

double grpo_combine(int fmt, int acc) {
  if ((fmt != 0 && fmt != 1) || (acc != 0 && acc != 1))
    throw ContractViolation("grpo_combine inputs must be 0 or 1");
  if (fmt == 1 && acc == 1) return 0.1 * fmt + 0.9 * acc;
  return 0.0;
}

double dapo_combine(int acc, double len_pen) {
  if (acc != 0 && acc != 1) throw ContractViolation("dapo_combine: acc must be 0 or 1");
  if (len_pen < -1.0 || len_pen > 0.0)
    throw ContractViolation("dapo_combine: len_pen must lie in [-1, 0]");
  if (acc == 1 && len_pen == 0.0) return 0.5 * acc + 0.5 * len_pen;
  return -1.0;
}

RewardBreakdown score_response(const Vocabulary& vocab, const TokenSeq& response,
                               int ground_truth_option, Algorithm algorithm, int l_max,
                               int l_cache) {
  RewardBreakdown r;
  r.fmt = format_reward(vocab, response);
  r.acc = accuracy_reward(extract_answer(vocab, response), ground_truth_option);
  r.len_penalty = length_penalty(response.length(), l_max, l_cache);
  r.combined = algorithm == Algorithm::kGrpo ? grpo_combine(r.fmt, r.acc)
                                             : dapo_combine(r.acc, r.len_penalty);
  return r;
}

}  // namespace grouprl
