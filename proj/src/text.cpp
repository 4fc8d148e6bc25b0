#include "retaug/text.hpp"

#include <unicode/uchar.h>
#include <unicode/unorm2.h>
#include <unicode/ustring.h>
#include <unicode/utf16.h>

#include <cctype>
#include <stdexcept>

namespace retaug {

namespace {

inline bool ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

inline bool all_ascii(std::string_view s) {
  for (unsigned char c : s)
    if (c >= 0x80) return false;
  return true;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_ws = false;
  for (char c : s) {
    if (ascii_space(c)) {
      in_ws = true;
      continue;
    }
    if (in_ws && !out.empty()) out.push_back(' ');
    in_ws = false;
    out.push_back(c);
  }
  return out;
}

// NFC + per-codepoint simple lowercase. Invalid UTF-8 bytes are replaced
// with U+FFFD so the result is deterministic for any input.
std::string nfc_lower(std::string_view s) {
  UErrorCode ec = U_ZERO_ERROR;
  std::vector<UChar> u16(s.size() + 1);
  int32_t u16_len = 0;
  u_strFromUTF8WithSub(u16.data(), int32_t(u16.size()), &u16_len, s.data(),
                       int32_t(s.size()), 0xFFFD, nullptr, &ec);
  if (U_FAILURE(ec)) return std::string(s);

  const UNormalizer2* nfc = unorm2_getNFCInstance(&ec);
  std::vector<UChar> norm(std::size_t(u16_len) * 2 + 16);
  int32_t norm_len = unorm2_normalize(nfc, u16.data(), u16_len, norm.data(),
                                      int32_t(norm.size()), &ec);
  if (ec == U_BUFFER_OVERFLOW_ERROR) {
    ec = U_ZERO_ERROR;
    norm.resize(std::size_t(norm_len) + 1);
    norm_len = unorm2_normalize(nfc, u16.data(), u16_len, norm.data(),
                                int32_t(norm.size()), &ec);
  }
  if (U_FAILURE(ec)) return std::string(s);

  std::vector<UChar> lower;
  lower.reserve(std::size_t(norm_len) + 4);
  for (int32_t i = 0; i < norm_len;) {
    UChar32 cp;
    U16_NEXT(norm.data(), i, norm_len, cp);
    cp = u_tolower(cp);
    UChar buf[2];
    int32_t n = 0;
    UBool err = false;
    U16_APPEND(buf, n, 2, cp, err);
    if (!err)
      for (int32_t j = 0; j < n; ++j) lower.push_back(buf[j]);
  }

  std::string out(lower.size() * 4 + 4, '\0');
  int32_t out_len = 0;
  ec = U_ZERO_ERROR;
  u_strToUTF8(out.data(), int32_t(out.size()), &out_len, lower.data(),
              int32_t(lower.size()), &ec);
  if (U_FAILURE(ec)) return std::string(s);
  out.resize(std::size_t(out_len));
  return out;
}

}  // namespace

std::string normalize(std::string_view text) {
  if (all_ascii(text)) {
    std::string lowered(text);
    for (auto& c : lowered)
      if (c >= 'A' && c <= 'Z') c = char(c - 'A' + 'a');
    return collapse_whitespace(lowered);
  }
  return collapse_whitespace(nfc_lower(text));
}

std::vector<std::string_view> tokenize(std::string_view text) {
  std::vector<std::string_view> toks;
  std::size_t i = 0, n = text.size();
  while (i < n) {
    while (i < n && ascii_space(text[i])) ++i;
    std::size_t start = i;
    while (i < n && !ascii_space(text[i])) ++i;
    if (i > start) toks.push_back(text.substr(start, i - start));
  }
  return toks;
}

std::size_t token_count(std::string_view text) {
  std::size_t count = 0, i = 0, n = text.size();
  while (i < n) {
    while (i < n && ascii_space(text[i])) ++i;
    if (i < n) ++count;
    while (i < n && !ascii_space(text[i])) ++i;
  }
  return count;
}

std::vector<std::string> segment(std::string_view document, const SegmentConfig& cfg) {
  std::vector<std::string> out;
  auto flush = [&](std::string_view piece) {
    // trim
    std::size_t b = 0, e = piece.size();
    while (b < e && ascii_space(piece[b])) ++b;
    while (e > b && ascii_space(piece[e - 1])) --e;
    if (b == e) return;
    std::string_view trimmed = piece.substr(b, e - b);
    std::size_t toks = token_count(trimmed);
    if (toks < std::size_t(cfg.min_tokens) || toks > std::size_t(cfg.max_tokens)) return;
    out.emplace_back(trimmed);
  };

  std::size_t start = 0;
  const std::size_t n = document.size();
  for (std::size_t i = 0; i < n; ++i) {
    char c = document[i];
    if ((c == '.' || c == '!' || c == '?') &&
        (i + 1 == n || ascii_space(document[i + 1]))) {
      flush(document.substr(start, i + 1 - start));
      start = i + 1;
    }
  }
  if (start < n) flush(document.substr(start));
  return out;
}

std::uint64_t fingerprint64(std::string_view normalized_text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : normalized_text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace retaug
