#pragma once

#include "grouprl/config.hpp"
#include "grouprl/env.hpp"
#include "grouprl/policy.hpp"
#include "grouprl/rlcore.hpp"

#include <string>
#include <vector>

namespace grouprl {

struct StepMetrics {
  int step = 0;  // update counter, 1-based
  double mean_reward = 0.0;
  double accuracy_rate = 0.0;
  double format_rate = 0.0;
  double mean_kl = 0.0;
  double clip_fraction = 0.0;
  double mean_entropy = 0.0;
  int kept_groups = 0;
  int dropped_groups = 0;
  double wall_ms = 0.0;  // measured; excluded from the persisted log
};

struct TrainResult {
  PolicyParams params;
  std::vector<StepMetrics> metrics;
  uint64_t ref_fingerprint = 0;  // fingerprint of the frozen reference params
  int skipped_steps = 0;
};

// The full RL loop: freeze the old policy, sample G responses per prompt,
// score rewards with the algorithm's combiner, compute group advantages,
// filter and refill (DAPO), then take gradient-ascent updates on the
// objective. Metrics are appended for every update. Bit-reproducible for a
// fixed seed at any worker count.
TrainResult run_training(const PolicyModel& model, const TrainConfig& config,
                         const std::vector<McqItem>& dataset, PolicyParams initial_params);

PolicyParams make_initial_params(const PolicyModel& model, PolicyInit init);

enum class EvalMode { kSampled, kGreedy };

struct EvalReport {
  double accuracy_rate = 0.0;
  double format_rate = 0.0;
};

// Two measurements per item:
//  - format_rate from a free rollout under the policy;
//  - accuracy_rate from a constrained answer probe that fixes the response
//    skeleton and draws only the answer slot, restricted to the six option
//    tokens. The probe isolates answer knowledge from formatting ability
//    (a zero policy scores 1/6 instead of the near-zero a free rollout
//    would give).
EvalReport evaluate(const PolicyModel& model, const PolicyParams& params,
                    const std::vector<McqItem>& items, EvalMode mode, uint64_t seed = 0);

// Metrics log: TSV, one header line, then one record per update with columns
//   step mean_reward accuracy_rate format_rate mean_kl clip_fraction
//   mean_entropy kept_groups dropped_groups
void write_metrics(const std::string& path, const std::vector<StepMetrics>& metrics);

// Rollout sampling shared with the trainer; exposed for tests. The stream
// for (prompt_counter, rollout k) is derive_stream(seed, lane, counter, k).
std::vector<RolloutGroup> sample_groups(const PolicyModel& model, const PolicyParams& params,
                                        const std::vector<const McqItem*>& prompts,
                                        uint64_t first_prompt_counter, int group_size, int l_hard,
                                        uint64_t seed, int workers);

constexpr uint64_t kRolloutLane = 0x5A3F19;

}  // namespace grouprl
