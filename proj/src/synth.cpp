#include "retaug/synth.hpp"

#include <cmath>
#include <stdexcept>

#include "retaug/common.hpp"

namespace retaug {

namespace {

inline double unit_double(SplitMix64& g) {
  return double(g.next() >> 11) * 0x1.0p-53;  // [0, 1)
}

inline std::uint32_t below(SplitMix64& g, std::uint32_t n) {
  return std::uint32_t(g.next() % n);
}

struct TokenPools {
  std::vector<std::vector<std::string>> class_pool;       // per class
  std::vector<std::string> shared_pool;
  std::vector<std::vector<std::string>> distractor_pool;  // per topic
};

TokenPools make_pools(const SynthTaskConfig& cfg) {
  TokenPools p;
  p.class_pool.resize(std::size_t(cfg.n_classes));
  for (int c = 0; c < cfg.n_classes; ++c)
    for (std::uint32_t i = 0; i < cfg.vocab_size; ++i)
      p.class_pool[std::size_t(c)].push_back("c" + std::to_string(c) + "w" + std::to_string(i));
  for (std::uint32_t i = 0; i < cfg.shared_vocab; ++i)
    p.shared_pool.push_back("shw" + std::to_string(i));
  p.distractor_pool.resize(cfg.n_distractor_topics);
  for (std::uint32_t t = 0; t < cfg.n_distractor_topics; ++t)
    for (std::uint32_t i = 0; i < cfg.vocab_size; ++i)
      p.distractor_pool[t].push_back("d" + std::to_string(t) + "w" + std::to_string(i));
  return p;
}

std::string sentence_for_class(const SynthTaskConfig& cfg, const TokenPools& pools, int cls,
                               SplitMix64& g) {
  const int len = cfg.len_min + int(below(g, std::uint32_t(cfg.len_max - cfg.len_min + 1)));
  std::string s;
  for (int i = 0; i < len; ++i) {
    const bool shared = !pools.shared_pool.empty() && unit_double(g) < cfg.overlap;
    const auto& pool = shared ? pools.shared_pool : pools.class_pool[std::size_t(cls)];
    if (i) s += ' ';
    s += pool[below(g, std::uint32_t(pool.size()))];
  }
  return s;
}

std::string distractor_sentence(const SynthTaskConfig& cfg, const TokenPools& pools,
                                SplitMix64& g) {
  const auto& pool = pools.distractor_pool[below(g, cfg.n_distractor_topics)];
  const int len = cfg.len_min + int(below(g, std::uint32_t(cfg.len_max - cfg.len_min + 1)));
  std::string s;
  for (int i = 0; i < len; ++i) {
    if (i) s += ' ';
    s += pool[below(g, std::uint32_t(pool.size()))];
  }
  return s;
}

LabeledDataset make_split(const SynthTaskConfig& cfg, const TokenPools& pools, std::uint32_t n,
                          SplitMix64& g) {
  LabeledDataset ds;
  for (int c = 0; c < cfg.n_classes; ++c) ds.intern_label("class" + std::to_string(c));
  // round-robin over classes keeps splits balanced for any n
  for (std::uint32_t i = 0; i < n; ++i) {
    int cls = int(i % std::uint32_t(cfg.n_classes));
    ds.add_id(cls, sentence_for_class(cfg, pools, cls, g));
  }
  return ds;
}

}  // namespace

SyntheticTask generate_synthetic_task(const SynthTaskConfig& cfg) {
  if (cfg.n_classes < 2) throw std::invalid_argument("synthetic task needs >= 2 classes");
  if (cfg.vocab_size == 0 || cfg.len_min < 1 || cfg.len_max < cfg.len_min)
    throw std::invalid_argument("bad synthetic task shape");
  if (cfg.distractor_ratio < 0.0 || cfg.distractor_ratio > 1.0)
    throw std::invalid_argument("distractor_ratio must be in [0, 1]");
  if (cfg.distractor_ratio > 0.0 && cfg.n_distractor_topics == 0)
    throw std::invalid_argument("distractors requested but no distractor topics");

  const TokenPools pools = make_pools(cfg);
  SyntheticTask task;

  // independent streams so changing one section's size leaves the others
  SplitMix64 g_train(mix_seed(cfg.seed, 1));
  SplitMix64 g_valid(mix_seed(cfg.seed, 2));
  SplitMix64 g_test(mix_seed(cfg.seed, 3));
  SplitMix64 g_bank(mix_seed(cfg.seed, 4));

  task.train = make_split(cfg, pools, cfg.n_train, g_train);
  task.valid = make_split(cfg, pools, cfg.n_valid, g_valid);
  task.test = make_split(cfg, pools, cfg.n_test, g_test);

  task.bank_sentences.reserve(cfg.bank_size);
  for (std::uint64_t i = 0; i < cfg.bank_size; ++i) {
    if (unit_double(g_bank) < cfg.distractor_ratio) {
      task.bank_sentences.push_back(distractor_sentence(cfg, pools, g_bank));
    } else {
      int cls = int(below(g_bank, std::uint32_t(cfg.n_classes)));
      task.bank_sentences.push_back(sentence_for_class(cfg, pools, cls, g_bank));
    }
  }

  for (const auto& pool : pools.class_pool)
    task.tokens.insert(task.tokens.end(), pool.begin(), pool.end());
  task.tokens.insert(task.tokens.end(), pools.shared_pool.begin(), pools.shared_pool.end());
  for (const auto& pool : pools.distractor_pool)
    task.tokens.insert(task.tokens.end(), pool.begin(), pool.end());
  return task;
}

std::vector<std::string> generate_indomain_sentences(const SynthTaskConfig& cfg, std::uint64_t n) {
  const TokenPools pools = make_pools(cfg);
  SplitMix64 g(mix_seed(cfg.seed, 5));
  std::vector<std::string> out;
  out.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    int cls = int(below(g, std::uint32_t(cfg.n_classes)));
    out.push_back(sentence_for_class(cfg, pools, cls, g));
  }
  return out;
}

WordVectorTable synth_word_vectors(const std::vector<std::string>& tokens, std::uint32_t dim,
                                   std::uint64_t seed) {
  if (dim == 0) throw std::invalid_argument("word vector dim must be positive");
  WordVectorTable table;
  table.dim = dim;
  SplitMix64 g(mix_seed(seed, 0x77));
  std::vector<float> v(dim);
  for (const auto& tok : tokens) {
    // Box-Muller over the raw stream; library distributions are not
    // bit-stable across standard libraries.
    for (std::uint32_t i = 0; i < dim; i += 2) {
      double u1 = unit_double(g), u2 = unit_double(g);
      if (u1 < 1e-300) u1 = 1e-300;
      double r = std::sqrt(-2.0 * std::log(u1));
      v[i] = float(r * std::cos(2.0 * M_PI * u2));
      if (i + 1 < dim) v[i + 1] = float(r * std::sin(2.0 * M_PI * u2));
    }
    Vec vv(v.begin(), v.end());
    if (!l2_normalize(vv)) vv[0] = 1.0f;  // vanishing odds, but stay unit norm
    table.add(tok, vv);
  }
  return table;
}

}  // namespace retaug
