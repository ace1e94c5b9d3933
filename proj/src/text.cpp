#include "corpusforge/text.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/uscript.h>

#include <algorithm>

namespace corpusforge::text {

namespace {

constexpr char32_t kReplacement = 0xFFFD;

// Decodes one code point starting at bytes[i]; returns the length consumed or 0
// if the sequence is malformed (overlong, surrogate, out of range, truncated).
std::size_t decode_one(std::string_view bytes, std::size_t i, char32_t& out) noexcept {
  const auto b0 = static_cast<unsigned char>(bytes[i]);
  if (b0 < 0x80) {
    out = b0;
    return 1;
  }
  std::size_t len = 0;
  char32_t cp = 0;
  char32_t min = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
    min = 0x80;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
    min = 0x800;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
    min = 0x10000;
  } else {
    return 0;
  }
  if (i + len > bytes.size()) return 0;
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(bytes[i + k]);
    if ((b & 0xC0) != 0x80) return 0;
    cp = (cp << 6) | (b & 0x3F);
  }
  if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return 0;
  out = cp;
  return len;
}

std::string from_icu(const icu::UnicodeString& s) {
  std::string out;
  s.toUTF8String(out);
  return out;
}

icu::UnicodeString to_icu(std::string_view utf8) {
  return icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
}

}  // namespace

std::optional<std::size_t> find_invalid_utf8(std::string_view bytes) noexcept {
  std::size_t i = 0;
  while (i < bytes.size()) {
    char32_t cp = 0;
    const auto n = decode_one(bytes, i, cp);
    if (n == 0) return i;
    i += n;
  }
  return std::nullopt;
}

std::u32string decode(std::string_view utf8) {
  std::u32string out;
  out.reserve(utf8.size());
  std::size_t i = 0;
  while (i < utf8.size()) {
    char32_t cp = 0;
    const auto n = decode_one(utf8, i, cp);
    if (n == 0) {
      out.push_back(kReplacement);
      ++i;
    } else {
      out.push_back(cp);
      i += n;
    }
  }
  return out;
}

std::string encode(std::u32string_view codepoints) {
  std::string out;
  out.reserve(codepoints.size());
  for (char32_t c : codepoints) {
    if (c > 0x10FFFF || (c >= 0xD800 && c <= 0xDFFF)) c = kReplacement;
    if (c < 0x80) {
      out.push_back(static_cast<char>(c));
    } else if (c < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (c >> 6)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else if (c < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (c >> 12)));
      out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (c >> 18)));
      out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    }
  }
  return out;
}

bool is_space(char32_t c) noexcept {
  switch (c) {
    case 0x0009: case 0x000A: case 0x000B: case 0x000C: case 0x000D:
    case 0x0020: case 0x0085: case 0x00A0: case 0x1680:
    case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200A;
  }
}

bool is_letter(char32_t c) noexcept {
  return (U_GET_GC_MASK(static_cast<UChar32>(c)) & U_GC_L_MASK) != 0;
}

std::string script_name(char32_t c) {
  UErrorCode status = U_ZERO_ERROR;
  const UScriptCode code = uscript_getScript(static_cast<UChar32>(c), &status);
  if (U_FAILURE(status)) return "Unknown";
  const char* name = uscript_getName(code);
  return name != nullptr ? name : "Unknown";
}

std::size_t codepoint_count(std::string_view utf8) { return decode(utf8).size(); }

std::optional<char32_t> last_codepoint(std::string_view utf8) {
  const auto cps = decode(utf8);
  if (cps.empty()) return std::nullopt;
  return cps.back();
}

std::string trim(std::string_view utf8) {
  const auto cps = decode(utf8);
  auto first = std::find_if_not(cps.begin(), cps.end(), is_space);
  auto last = std::find_if_not(cps.rbegin(), cps.rend(), is_space).base();
  if (first >= last) return {};
  return encode(std::u32string_view(&*first, static_cast<std::size_t>(last - first)));
}

std::string collapse_whitespace(std::string_view utf8) {
  std::u32string out;
  bool pending_space = false;
  for (char32_t c : decode(utf8)) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(U' ');
    pending_space = false;
    out.push_back(c);
  }
  return encode(out);
}

std::vector<std::string> split_tokens(std::string_view utf8) {
  std::vector<std::string> tokens;
  std::u32string current;
  for (char32_t c : decode(utf8)) {
    if (is_space(c)) {
      if (!current.empty()) tokens.push_back(encode(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) tokens.push_back(encode(current));
  return tokens;
}

std::string to_lower(std::string_view utf8) {
  auto s = to_icu(utf8);
  s.toLower(icu::Locale::getRoot());
  return from_icu(s);
}

std::string fold_case(std::string_view utf8) {
  auto s = to_icu(utf8);
  s.foldCase();
  return from_icu(s);
}

std::string nfc(std::string_view utf8) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* normalizer = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) return std::string(utf8);
  const auto normalized = normalizer->normalize(to_icu(utf8), status);
  if (U_FAILURE(status)) return std::string(utf8);
  return from_icu(normalized);
}

std::optional<char> terminal_mark(std::string_view utf8) {
  const auto cps = decode(utf8);
  auto it = std::find_if_not(cps.rbegin(), cps.rend(), is_space);
  if (it == cps.rend()) return std::nullopt;
  if (*it == U'.' || *it == U'!' || *it == U'?') return static_cast<char>(*it);
  return std::nullopt;
}

}  // namespace corpusforge::text
