#include "retaug/word_vectors.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "retaug/text.hpp"

namespace retaug {

const float* WordVectorTable::find(std::string_view token) const {
  auto it = vocab.find(std::string(token));
  if (it == vocab.end()) return nullptr;
  return vectors.data() + std::size_t(it->second) * dim;
}

double WordVectorTable::prob(std::string_view token) const {
  auto it = vocab.find(std::string(token));
  if (it == vocab.end() || unigram_prob.empty()) return 0.0;
  return unigram_prob[it->second];
}

void WordVectorTable::add(std::string token, std::span<const float> v) {
  if (dim == 0) dim = std::uint32_t(v.size());
  if (v.size() != dim) throw std::invalid_argument("word vector dimension mismatch");
  auto [it, inserted] = vocab.emplace(std::move(token), std::uint32_t(tokens.size()));
  if (!inserted) return;  // first definition wins
  tokens.push_back(it->first);
  vectors.insert(vectors.end(), v.begin(), v.end());
}

WordVectorTable WordVectorTable::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open word vectors: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty word vector file: " + path);

  std::size_t declared_count = 0, declared_dim = 0;
  {
    auto toks = tokenize(line);
    if (toks.size() != 2) throw std::runtime_error("bad word vector header: " + path);
    std::from_chars(toks[0].data(), toks[0].data() + toks[0].size(), declared_count);
    std::from_chars(toks[1].data(), toks[1].data() + toks[1].size(), declared_dim);
  }
  if (declared_dim == 0) throw std::runtime_error("zero dimension in word vector file");

  WordVectorTable table;
  table.dim = std::uint32_t(declared_dim);
  table.tokens.reserve(declared_count);
  table.vectors.reserve(declared_count * declared_dim);

  std::vector<float> row(declared_dim);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto toks = tokenize(line);
    if (toks.size() != declared_dim + 1)
      throw std::runtime_error("bad word vector row for token '" +
                               std::string(toks.empty() ? std::string_view{} : toks[0]) + "'");
    for (std::size_t j = 0; j < declared_dim; ++j) {
      auto [p, ec] = std::from_chars(toks[j + 1].data(), toks[j + 1].data() + toks[j + 1].size(), row[j]);
      if (ec != std::errc()) throw std::runtime_error("bad float in word vector file");
      (void)p;
    }
    table.add(std::string(toks[0]), row);
  }
  return table;
}

void WordVectorTable::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << tokens.size() << " " << dim << "\n";
  char buf[32];
  for (std::size_t r = 0; r < tokens.size(); ++r) {
    out << tokens[r];
    for (std::uint32_t j = 0; j < dim; ++j) {
      std::snprintf(buf, sizeof(buf), " %.8g", double(vectors[r * dim + j]));
      out << buf;
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

void WordVectorTable::count_tokens_into(std::string_view sentence,
                                        std::vector<std::uint64_t>& counts) const {
  for (auto tok : tokenize(sentence)) {
    auto it = vocab.find(std::string(tok));
    if (it != vocab.end()) ++counts[it->second];
  }
}

void WordVectorTable::finalize_unigram(const std::vector<std::uint64_t>& counts) {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  unigram_prob.assign(tokens.size(), 0.0);
  if (total == 0) {
    // Degenerate corpus: fall back to uniform so probabilities still sum to 1.
    double u = tokens.empty() ? 0.0 : 1.0 / double(tokens.size());
    for (auto& p : unigram_prob) p = u;
    return;
  }
  for (std::size_t i = 0; i < counts.size(); ++i)
    unigram_prob[i] = double(counts[i]) / double(total);
}

}  // namespace retaug
