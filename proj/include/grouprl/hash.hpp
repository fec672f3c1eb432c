#pragma once

#include <cstddef>
#include <cstdint>

namespace grouprl {

inline uint64_t fnv1a64(const void* data, size_t len, uint64_t seed = 0xCBF29CE484222325ULL) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  uint64_t h = seed;
  for (size_t i = 0; i < len; ++i) {
    h ^= bytes[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace grouprl
