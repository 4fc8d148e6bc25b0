#include "retaug/augment.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include "retaug/text.hpp"

namespace retaug {

std::vector<std::uint64_t> class_quotas(const std::vector<std::uint64_t>& train_counts,
                                        std::uint64_t target_total,
                                        std::vector<int>* zero_classes) {
  const std::size_t n = train_counts.size();
  if (n == 0) throw std::invalid_argument("class_quotas: no classes");
  const std::uint64_t total = std::accumulate(train_counts.begin(), train_counts.end(),
                                              std::uint64_t(0));
  if (total == 0) throw std::invalid_argument("class_quotas: all training counts are zero");
  std::size_t positive = 0;
  for (auto c : train_counts) positive += c > 0;
  if (target_total < positive)
    throw std::invalid_argument("class_quotas: target smaller than number of classes");

  std::vector<std::uint64_t> quotas(n, 0);
  std::vector<double> remainder(n, 0.0);
  std::uint64_t assigned = 0;
  for (std::size_t c = 0; c < n; ++c) {
    if (train_counts[c] == 0) {
      if (zero_classes) zero_classes->push_back(int(c));
      std::fprintf(stderr, "class_quotas: class %zu has no training examples, quota 0\n", c);
      continue;
    }
    // integer floor of target * count / total, without overflow for desk sizes
    std::uint64_t num = target_total * train_counts[c];
    quotas[c] = num / total;
    remainder[c] = double(num % total) / double(total);
    assigned += quotas[c];
  }

  std::uint64_t remaining = target_total - assigned;

  // Every class that appears in training gets at least one slot. If the
  // floors already consumed the budget, the extra slot comes from the
  // largest current quota instead.
  for (std::size_t c = 0; c < n; ++c) {
    if (train_counts[c] == 0 || quotas[c] > 0) continue;
    if (remaining > 0) {
      --remaining;
    } else {
      std::size_t donor = n;
      for (std::size_t d = 0; d < n; ++d)
        if (quotas[d] >= 2 && (donor == n || quotas[d] > quotas[donor])) donor = d;
      if (donor == n) throw std::logic_error("class_quotas: cannot satisfy minimum quota");
      --quotas[donor];
    }
    quotas[c] = 1;
    remainder[c] = 0.0;
  }

  // Largest fractional remainder takes the leftovers, lowest id on ties.
  std::vector<std::size_t> order;
  for (std::size_t c = 0; c < n; ++c)
    if (train_counts[c] > 0) order.push_back(c);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; remaining > 0; i = (i + 1) % order.size()) {
    ++quotas[order[i]];
    --remaining;
  }
  return quotas;
}

std::uint64_t choose_multiplier(std::uint64_t train_size, const AugmentConfig& cfg) {
  if (train_size < 1) throw std::invalid_argument("choose_multiplier: empty training set");
  if (cfg.multiplier > 0) return cfg.multiplier;
  return train_size < cfg.small_task_threshold ? 100 : 10;
}

FilterResult filter_synthetic(const std::vector<SyntheticExample>& pool,
                              const std::vector<std::uint64_t>& quotas,
                              const std::vector<std::string>& train_texts, bool allow_shortfall) {
  std::unordered_set<std::string> train_norm;
  train_norm.reserve(train_texts.size());
  for (const auto& t : train_texts) train_norm.insert(normalize(t));

  const std::size_t n_classes = quotas.size();
  std::vector<std::vector<std::size_t>> candidates(n_classes);
  FilterResult res;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& ex = pool[i];
    if (ex.assigned_class < 0 || std::size_t(ex.assigned_class) >= n_classes)
      throw std::invalid_argument("filter_synthetic: assigned class out of range");
    if (train_norm.count(normalize(ex.text))) {
      ++res.excluded_train_overlap;
      continue;
    }
    candidates[std::size_t(ex.assigned_class)].push_back(i);
  }

  for (std::size_t c = 0; c < n_classes; ++c) {
    auto& cand = candidates[c];
    std::sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) {
      if (pool[a].confidence != pool[b].confidence) return pool[a].confidence > pool[b].confidence;
      return pool[a].id < pool[b].id;
    });
    if (cand.size() < quotas[c])
      res.shortfalls.push_back(ClassShortfall{int(c), quotas[c], cand.size()});
    const std::size_t take = std::min<std::size_t>(cand.size(), quotas[c]);
    for (std::size_t i = 0; i < take; ++i) res.selected.push_back(pool[cand[i]]);
  }

  if (!res.shortfalls.empty() && !allow_shortfall) {
    std::string msg = "filter_synthetic: not enough candidates for class";
    for (const auto& s : res.shortfalls)
      msg += " " + std::to_string(s.label) + " (" + std::to_string(s.available) + "/" +
             std::to_string(s.quota) + ")";
    throw std::runtime_error(msg);
  }
  return res;
}

}  // namespace retaug
