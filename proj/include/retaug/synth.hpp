#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "retaug/dataset.hpp"
#include "retaug/word_vectors.hpp"

namespace retaug {

// Controlled text-classification task: each class draws tokens from its own
// vocabulary plus a shared pool (overlap); the bank mixes sentences from the
// task's generator with distractors over disjoint vocabularies.
struct SynthTaskConfig {
  std::uint64_t seed = 0;
  std::uint32_t vocab_size = 200;       // class-specific tokens per class
  int n_classes = 2;
  std::uint32_t n_train = 40;           // split evenly across classes
  std::uint32_t n_valid = 400;
  std::uint32_t n_test = 1000;
  std::uint64_t bank_size = 500000;
  double distractor_ratio = 0.8;        // fraction of bank drawn from distractor topics
  double overlap = 0.25;                // per-token probability of a shared-pool draw
  std::uint32_t shared_vocab = 200;     // shared pool size
  std::uint32_t n_distractor_topics = 20;
  int len_min = 6;
  int len_max = 12;
};

struct SyntheticTask {
  LabeledDataset train, valid, test;
  std::vector<std::string> bank_sentences;
  std::vector<std::string> tokens;  // every token any generator can emit
};

SyntheticTask generate_synthetic_task(const SynthTaskConfig& cfg);

// Extra in-domain sentences from the same generator (no distractors), on an
// RNG stream independent of the task splits and the bank.
std::vector<std::string> generate_indomain_sentences(const SynthTaskConfig& cfg, std::uint64_t n);

// Unit-norm token embeddings for the task vocabulary, deterministic per seed.
WordVectorTable synth_word_vectors(const std::vector<std::string>& tokens, std::uint32_t dim,
                                   std::uint64_t seed);

}  // namespace retaug
