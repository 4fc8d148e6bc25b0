#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "retaug/classifier.hpp"
#include "retaug/dataset.hpp"
#include "retaug/embedder.hpp"

namespace retaug {

struct AccuracyResult {
  double accuracy = 0.0;
  std::size_t evaluated = 0;
  std::size_t unembeddable = 0;  // counted as errors
};

// Fraction of examples whose argmax class matches the label. Examples that
// fail to embed count as wrong (and are reported).
AccuracyResult eval_accuracy(const Classifier& model, const LabeledDataset& test,
                             const Encoder& encoder);
// Variant over precomputed features; entries with empty feature vectors are
// treated as unembeddable.
AccuracyResult eval_accuracy(const Classifier& model, const std::vector<Vec>& features,
                             const std::vector<int>& labels);

struct StsPair {
  std::string s1, s2;
  double gold = 0.0;
};

struct StsResult {
  double pearson = 0.0;
  double spearman = 0.0;
  std::size_t used = 0;
  std::size_t dropped = 0;  // pairs where either side failed to embed
};

// Correlation between cos(enc(s1), enc(s2)) and the gold scores. Spearman
// uses tie-averaged ranks. Throws when every pair drops.
StsResult eval_sts(const Encoder& encoder, const std::vector<StsPair>& pairs);

// TSV: s1<TAB>s2<TAB>gold
std::vector<StsPair> load_sts_pairs(const std::string& path);

double pearson_corr(const std::vector<double>& x, const std::vector<double>& y);
double spearman_corr(const std::vector<double>& x, const std::vector<double>& y);
std::vector<double> tie_averaged_ranks(const std::vector<double>& xs);

}  // namespace retaug
