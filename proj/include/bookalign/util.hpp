#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>

namespace bookalign {

/// Shortest decimal representation that parses back to the same double.
inline std::string to_compact_string(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

namespace utf8 {

/// Decodes the code point starting at text[pos]; writes its byte length to len.
/// Malformed bytes are treated as single-byte code points.
inline uint32_t decode(std::string_view text, size_t pos, size_t& len) {
  const unsigned char c0 = static_cast<unsigned char>(text[pos]);
  if (c0 < 0x80) {
    len = 1;
    return c0;
  }
  size_t need = 0;
  uint32_t cp = 0;
  if ((c0 & 0xE0) == 0xC0) {
    need = 1;
    cp = c0 & 0x1F;
  } else if ((c0 & 0xF0) == 0xE0) {
    need = 2;
    cp = c0 & 0x0F;
  } else if ((c0 & 0xF8) == 0xF0) {
    need = 3;
    cp = c0 & 0x07;
  } else {
    len = 1;
    return c0;
  }
  if (pos + need >= text.size()) {  // truncated sequence at end of string
    len = 1;
    return c0;
  }
  for (size_t i = 1; i <= need; ++i) {
    const unsigned char c = static_cast<unsigned char>(text[pos + i]);
    if ((c & 0xC0) != 0x80) {
      len = 1;
      return c0;
    }
    cp = (cp << 6) | (c & 0x3F);
  }
  len = need + 1;
  return cp;
}

/// ASCII whitespace plus ideographic space and NBSP.
inline bool is_space(uint32_t cp) {
  return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' ||
         cp == '\v' || cp == 0x3000 || cp == 0x00A0;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty()) {
    size_t len;
    const uint32_t cp = decode(s, 0, len);
    if (!is_space(cp)) break;
    s.remove_prefix(len);
  }
  while (!s.empty()) {
    // scan for the last code point
    size_t last = s.size() - 1;
    while (last > 0 && (static_cast<unsigned char>(s[last]) & 0xC0) == 0x80) --last;
    size_t len;
    const uint32_t cp = decode(s, last, len);
    if (!is_space(cp)) break;
    s.remove_suffix(s.size() - last);
  }
  return s;
}

}  // namespace utf8
}  // namespace bookalign
