#pragma once

#include "grouprl/rewards.hpp"
#include "grouprl/rlcore.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace grouprl {

enum class OptimizerKind { kSgd, kAdam };

enum class PolicyInit { kZero, kTemplate };

struct Lengths {
  int l_hard = 12;
  int l_max = 10;
  int l_cache = 4;
};

struct TrainConfig {
  Algorithm algorithm = Algorithm::kGrpo;
  int group_size = 8;            // G
  int generation_batch = 32;     // prompts sampled per outer step
  int train_batch = 32;          // kept groups consumed per update (DAPO)
  int epochs = 5;
  int opt_epochs_per_batch = 1;
  double learning_rate = 1e-2;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  ClipConfig clip{0.2, 0.2, 0.04};
  Lengths lengths;
  uint64_t seed = 1;
  double eps_sigma = 1e-8;
  int max_refill_rounds = 4;
  int workers = 1;
  PolicyInit init = PolicyInit::kTemplate;

  void validate() const;  // throws ConfigError with the offending field
};

// Flat `key = value` document mirroring the TrainConfig field names; nested
// fields use dotted keys (clip.eps_low, lengths.L_hard, ...). Unknown keys
// are rejected. Missing keys keep their defaults.
TrainConfig parse_config_text(const std::string& text, const std::string& origin = "<config>");
TrainConfig load_config(const std::string& path);

// Serialization in the same key-value syntax; parse(serialize(c)) == c.
std::string serialize_config(const TrainConfig& config);

// Every key the parser accepts, in documented order.
const std::vector<std::string>& config_keys();

std::string algorithm_name(Algorithm a);
std::string optimizer_name(OptimizerKind o);
std::string init_name(PolicyInit i);

}  // namespace grouprl
