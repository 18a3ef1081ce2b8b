#include "sdoh/utf8.hpp"

namespace sdoh::utf8 {

namespace {

bool is_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

}  // namespace

std::size_t sequence_length(std::string_view s, std::size_t i) {
  if (i >= s.size()) return 0;
  const unsigned char lead = static_cast<unsigned char>(s[i]);
  std::size_t want = 1;
  if (lead < 0x80) {
    want = 1;
  } else if ((lead & 0xE0) == 0xC0) {
    want = 2;
  } else if ((lead & 0xF0) == 0xE0) {
    want = 3;
  } else if ((lead & 0xF8) == 0xF0) {
    want = 4;
  } else {
    return 1;  // stray continuation or invalid lead
  }
  if (i + want > s.size()) return 1;
  for (std::size_t k = 1; k < want; ++k) {
    if (!is_continuation(static_cast<unsigned char>(s[i + k]))) return 1;
  }
  return want;
}

std::size_t length(std::string_view s) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < s.size(); i += sequence_length(s, i)) ++n;
  return n;
}

std::size_t byte_offset(std::string_view s, std::size_t cp) {
  std::size_t i = 0;
  std::size_t seen = 0;
  while (i < s.size() && seen < cp) {
    i += sequence_length(s, i);
    ++seen;
  }
  return i;
}

std::size_t cp_index(std::string_view s, std::size_t b) {
  std::size_t i = 0;
  std::size_t cp = 0;
  while (i < s.size()) {
    const std::size_t next = i + sequence_length(s, i);
    if (b < next) return cp;
    i = next;
    ++cp;
  }
  return cp;
}

std::string_view slice(std::string_view s, std::size_t start_cp, std::size_t end_cp) {
  if (end_cp <= start_cp) return std::string_view{};
  const std::size_t b0 = byte_offset(s, start_cp);
  const std::size_t b1 = byte_offset(s, end_cp);
  return s.substr(b0, b1 - b0);
}

}  // namespace sdoh::utf8
