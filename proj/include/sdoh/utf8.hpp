#pragma once

#include <cstddef>
#include <string_view>

// Offset helpers over UTF-8 text. All annotation offsets in this codebase
// count Unicode code points, not bytes. Malformed byte sequences are treated
// as one code point per byte so every byte string has a defined length.
namespace sdoh::utf8 {

// Byte width of the sequence starting at s[i]; 1 for invalid leads.
std::size_t sequence_length(std::string_view s, std::size_t i);

// Number of code points in s.
std::size_t length(std::string_view s);

// Byte offset of code point index cp; clamps to s.size() past the end.
std::size_t byte_offset(std::string_view s, std::size_t cp);

// Code point index of the code point containing byte offset b.
std::size_t cp_index(std::string_view s, std::size_t b);

// Substring by code-point range [start_cp, end_cp).
std::string_view slice(std::string_view s, std::size_t start_cp, std::size_t end_cp);

}  // namespace sdoh::utf8
