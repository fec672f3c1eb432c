#pragma once

#include "grouprl/policy.hpp"

#include <string>

namespace grouprl {

// Binary checkpoint: magic, version, architecture (V, D, position buckets,
// hard cap), the token table, row-major weights, and a trailing FNV-1a64
// checksum over everything before it. Round-trips are bit-exact; corruption
// is rejected by the checksum before any field is trusted.
//
// Layout (all integers little-endian):
//   8 bytes  magic "GRPRLCKP"
//   u32      format version (currently 1)
//   u32      V, u32 D, u32 position_buckets, u32 l_hard
//   per token: u8 role, i32 arg, u32 name_len, name bytes
//   V*D f64  weights, row-major
//   u64      checksum
struct LoadedCheckpoint {
  PolicyModel model;
  PolicyParams params;
};

constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const PolicyModel& model,
                     const PolicyParams& params);

LoadedCheckpoint load_checkpoint(const std::string& path);

// Fingerprint of the weight bytes; used to assert reference-policy
// immutability across a training run.
uint64_t params_fingerprint(const PolicyParams& params);

}  // namespace grouprl
