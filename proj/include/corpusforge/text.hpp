#pragma once

// UTF-8 helpers shared by the filter rules, the built-in adapters and the
// heuristic scorer. Malformed input never throws here: decoding maps every
// invalid byte to U+FFFD.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace corpusforge::text {

/// Byte offset of the first malformed UTF-8 sequence, or nullopt if valid.
std::optional<std::size_t> find_invalid_utf8(std::string_view bytes) noexcept;

std::u32string decode(std::string_view utf8);
std::string encode(std::u32string_view codepoints);

/// Unicode White_Space property.
bool is_space(char32_t c) noexcept;
/// General category L*.
bool is_letter(char32_t c) noexcept;
/// Long ICU script name ("Latin", "Hangul", ...).
std::string script_name(char32_t c);

std::size_t codepoint_count(std::string_view utf8);
std::optional<char32_t> last_codepoint(std::string_view utf8);

std::string trim(std::string_view utf8);
/// Runs of whitespace become one ASCII space; leading/trailing removed.
std::string collapse_whitespace(std::string_view utf8);
std::vector<std::string> split_tokens(std::string_view utf8);

std::string to_lower(std::string_view utf8);
std::string fold_case(std::string_view utf8);
std::string nfc(std::string_view utf8);

/// One of '.', '!', '?' when the trimmed text ends with it.
std::optional<char> terminal_mark(std::string_view utf8);

}  // namespace corpusforge::text
