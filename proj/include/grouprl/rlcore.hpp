#pragma once

#include "grouprl/policy.hpp"
#include "grouprl/rewards.hpp"
#include "grouprl/vocab.hpp"

#include <utility>
#include <vector>

namespace grouprl {

struct Rollout {
  TokenSeq seq;
  std::vector<double> old_logprobs;  // per token, cached at sampling time
  RewardBreakdown reward;
};

// One prompt with its G sampled responses, rewards, and (once computed)
// group-relative advantages.
struct RolloutGroup {
  TokenSeq prompt;
  std::vector<Rollout> rollouts;
  std::vector<double> advantages;
  int ground_truth_option = -1;

  int group_size() const { return static_cast<int>(rollouts.size()); }
};

struct ClipConfig {
  double eps_low = 0.2;
  double eps_high = 0.2;
  double beta = 0.0;  // KL coefficient; used by the GRPO objective only
};

struct ObjectiveDiagnostics {
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;   // fraction of tokens where the clipped branch won strictly
  double mean_token_kl = 0.0;   // zero when no reference policy participates
  double mean_entropy = 0.0;    // mean policy entropy over visited states
  double mean_reward = 0.0;     // over all responses in the evaluated groups
  int kept_groups = 0;          // filter accounting; the trainer may overwrite
  int dropped_groups = 0;
  long token_count = 0;
};

struct ObjectiveReport {
  double value = 0.0;  // objective to maximize
  Matrix gradient;     // d value / d params, shape V x D
  ObjectiveDiagnostics diagnostics;
};

// A_i = (r_i - mean) / population stddev; all zeros when the stddev falls
// below eps_sigma. Requires at least two rewards.
std::vector<double> group_advantages(const std::vector<double>& rewards, double eps_sigma);

// exp(new_logprob - old_logprob).
double importance_ratio(double new_logprob, double old_logprob);

// min(ratio*adv, clamp(ratio, 1-eps_low, 1+eps_high)*adv). Ties resolve to
// the unclipped branch, which only matters for gradient attribution.
double clipped_term(double ratio, double adv, double eps_low, double eps_high);

// Exact KL(pi_new || pi_ref) over the vocabulary; terms with pi_new = 0
// contribute nothing.
double token_kl(const std::vector<double>& pi_new, const std::vector<double>& pi_ref);

// Group-mean objective: per group (1/G) sum_i (1/|o_i|) sum_t
// [clipped_term - beta * KL(pi(.|s_t) || pi_ref(.|s_t))], averaged over
// groups, with its exact analytic gradient. Requires eps_low == eps_high.
ObjectiveReport grpo_objective(const PolicyModel& model, const std::vector<RolloutGroup>& groups,
                               const PolicyParams& params, const PolicyParams& ref_params,
                               const ClipConfig& cfg);

// Token-mean objective: per group (1 / sum_i |o_i|) sum_i sum_t clipped_term
// with asymmetric bounds and no KL, averaged over groups. Every group must
// satisfy the mixed-correctness constraint.
ObjectiveReport dapo_objective(const PolicyModel& model, const std::vector<RolloutGroup>& groups,
                               const PolicyParams& params, const ClipConfig& cfg);

// Keeps exactly the groups whose correct-answer count lies strictly between
// 0 and G; order-preserving partition.
std::pair<std::vector<RolloutGroup>, std::vector<RolloutGroup>> dynamic_sampling_filter(
    const Vocabulary& vocab, std::vector<RolloutGroup> groups);

// Number of responses whose extracted answer matches the group ground truth.
int correct_count(const Vocabulary& vocab, const RolloutGroup& group);

}  // namespace grouprl
