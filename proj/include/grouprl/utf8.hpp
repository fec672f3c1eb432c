#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace grouprl::utf8 {

// Decodes the code point starting at byte offset `pos`, advancing `pos`.
// Malformed bytes decode as U+FFFD and advance one byte.
inline uint32_t decode(std::string_view s, size_t& pos) {
  const unsigned char b0 = static_cast<unsigned char>(s[pos]);
  if (b0 < 0x80) {
    ++pos;
    return b0;
  }
  int extra;
  uint32_t cp;
  if ((b0 & 0xE0) == 0xC0) {
    extra = 1;
    cp = b0 & 0x1FU;
  } else if ((b0 & 0xF0) == 0xE0) {
    extra = 2;
    cp = b0 & 0x0FU;
  } else if ((b0 & 0xF8) == 0xF0) {
    extra = 3;
    cp = b0 & 0x07U;
  } else {
    ++pos;
    return 0xFFFD;
  }
  if (pos + static_cast<size_t>(extra) >= s.size()) {
    ++pos;
    return 0xFFFD;
  }
  for (int i = 1; i <= extra; ++i) {
    const unsigned char bi = static_cast<unsigned char>(s[pos + static_cast<size_t>(i)]);
    if ((bi & 0xC0) != 0x80) {
      ++pos;
      return 0xFFFD;
    }
    cp = (cp << 6) | (bi & 0x3FU);
  }
  pos += static_cast<size_t>(extra) + 1;
  return cp;
}

// Byte length of the prefix holding at most `count` code points.
inline size_t prefix_bytes(std::string_view s, size_t count) {
  size_t pos = 0;
  size_t seen = 0;
  while (pos < s.size() && seen < count) {
    decode(s, pos);
    ++seen;
  }
  return pos;
}

}  // namespace grouprl::utf8
