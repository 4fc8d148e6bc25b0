#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace retaug {

// Token embedding table plus optional unigram probabilities estimated from a
// corpus. Probabilities sum to 1 over the vocabulary (tokens never seen in
// the corpus get probability 0).
struct WordVectorTable {
  std::uint32_t dim = 0;
  std::unordered_map<std::string, std::uint32_t> vocab;  // token -> row
  std::vector<std::string> tokens;                        // row -> token
  std::vector<float> vectors;                             // row-major
  std::vector<double> unigram_prob;                       // per row; empty until estimated

  std::span<const float> vec(std::uint32_t row) const { return {vectors.data() + std::size_t(row) * dim, dim}; }
  const float* find(std::string_view token) const;
  double prob(std::string_view token) const;
  bool has_probs() const { return !unigram_prob.empty(); }
  std::size_t size() const { return tokens.size(); }

  void add(std::string token, std::span<const float> v);

  // Text format: first line "count dim", then one token and dim
  // space-separated values per line.
  static WordVectorTable load(const std::string& path);
  void save(const std::string& path) const;

  // Counts whitespace tokens of the given sentences; OOV tokens are ignored.
  // Normalizes counts so probabilities sum to 1 over the vocabulary.
  template <typename SentenceRange>
  void estimate_unigram(const SentenceRange& sentences);
  void count_tokens_into(std::string_view sentence, std::vector<std::uint64_t>& counts) const;
  void finalize_unigram(const std::vector<std::uint64_t>& counts);
};

template <typename SentenceRange>
void WordVectorTable::estimate_unigram(const SentenceRange& sentences) {
  std::vector<std::uint64_t> counts(tokens.size(), 0);
  for (const auto& s : sentences) count_tokens_into(s, counts);
  finalize_unigram(counts);
}

}  // namespace retaug
