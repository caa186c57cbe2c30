#pragma once

#include <string>
#include <string_view>

// Offsets throughout the library count Unicode scalar values. These helpers
// convert between UTF-8 storage and code-point indexing.
namespace ddi::utf8 {

std::u32string decode(std::string_view text);
std::string encode(std::u32string_view text);
std::string encode(char32_t cp);
std::size_t length(std::string_view text);

/// Code points [start, end) of a UTF-8 string. Throws OffsetError when out of range.
std::string slice(std::string_view text, std::size_t start, std::size_t end);

}  // namespace ddi::utf8
