#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace retaug {

// Bump when normalize() changes behaviour; stored in bank metadata so that
// dedup and overlap removal are never mixed across incompatible versions.
inline constexpr std::uint32_t kNormalizationVersion = 1;

struct SegmentConfig {
  int min_tokens = 3;
  int max_tokens = 100;
};

// Canonical form used for dedup and overlap checks: Unicode NFC, simple
// per-codepoint lowercase, ASCII whitespace runs collapsed to one space,
// leading/trailing whitespace stripped. Idempotent.
std::string normalize(std::string_view text);

// Splits a document at '.', '!' or '?' followed by whitespace (or end of
// input) and keeps segments whose whitespace token count lies within
// [min_tokens, max_tokens]. Order preserved; empty input gives an empty list.
std::vector<std::string> segment(std::string_view document, const SegmentConfig& cfg);

std::vector<std::string_view> tokenize(std::string_view text);
std::size_t token_count(std::string_view text);

// FNV-1a. Stable across runs and platforms.
std::uint64_t fingerprint64(std::string_view normalized_text);

}  // namespace retaug
