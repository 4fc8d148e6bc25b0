#include "retaug/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "retaug/vectors.hpp"  // FormatError

namespace retaug {

AccuracyResult eval_accuracy(const Classifier& model, const LabeledDataset& test,
                             const Encoder& encoder) {
  if (test.examples.empty()) throw std::invalid_argument("eval_accuracy: empty test set");
  AccuracyResult res;
  std::size_t correct = 0;
  for (const auto& e : test.examples) {
    auto emb = encoder.encode(e.text);
    if (!emb) {
      ++res.unembeddable;
      continue;
    }
    auto probs = model.forward(std::span<const float>(*emb));
    correct += argmax_class(probs) == e.label;
  }
  res.evaluated = test.examples.size();
  res.accuracy = double(correct) / double(res.evaluated);
  return res;
}

AccuracyResult eval_accuracy(const Classifier& model, const std::vector<Vec>& features,
                             const std::vector<int>& labels) {
  if (features.empty()) throw std::invalid_argument("eval_accuracy: empty test set");
  if (features.size() != labels.size())
    throw std::invalid_argument("eval_accuracy: features/labels size mismatch");
  AccuracyResult res;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].empty()) {
      ++res.unembeddable;
      continue;
    }
    auto probs = model.forward(std::span<const float>(features[i]));
    correct += argmax_class(probs) == labels[i];
  }
  res.evaluated = features.size();
  res.accuracy = double(correct) / double(res.evaluated);
  return res;
}

double pearson_corr(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("pearson: need two same-length series");
  const double n = double(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw std::invalid_argument("pearson: a series is constant");
  return sxy / std::sqrt(sxx * syy);
}

std::vector<double> tie_averaged_ranks(const std::vector<double>& xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double avg = (double(i) + double(j)) / 2.0 + 1.0;  // 1-based
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman_corr(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson_corr(tie_averaged_ranks(x), tie_averaged_ranks(y));
}

StsResult eval_sts(const Encoder& encoder, const std::vector<StsPair>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("eval_sts: no pairs");
  StsResult res;
  std::vector<double> cos, gold;
  for (const auto& p : pairs) {
    auto e1 = encoder.encode(p.s1);
    auto e2 = encoder.encode(p.s2);
    if (!e1 || !e2) {
      ++res.dropped;
      continue;
    }
    cos.push_back(dotd(std::span<const float>(*e1), std::span<const float>(*e2)));
    gold.push_back(p.gold);
  }
  if (cos.empty()) throw std::runtime_error("eval_sts: every pair failed to embed");
  res.used = cos.size();
  res.pearson = pearson_corr(cos, gold);
  res.spearman = spearman_corr(cos, gold);
  return res;
}

std::vector<StsPair> load_sts_pairs(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open pairs file: " + path);
  std::vector<StsPair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto t1 = line.find('\t');
    auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos)
      throw FormatError(path + ":" + std::to_string(lineno) + ": expected s1<TAB>s2<TAB>gold");
    StsPair p;
    p.s1 = line.substr(0, t1);
    p.s2 = line.substr(t1 + 1, t2 - t1 - 1);
    try {
      p.gold = std::stod(line.substr(t2 + 1));
    } catch (const std::exception&) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": bad gold score");
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace retaug
