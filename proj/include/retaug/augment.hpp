#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "retaug/classifier.hpp"

namespace retaug {

struct AugmentConfig {
  std::uint64_t multiplier = 0;  // 0: pick automatically from train size
  std::uint64_t small_task_threshold = 5000;
  bool allow_shortfall = true;
};

// Augmented-set size per class, proportional to the training label ratio.
// Floor division first; classes with a positive count never round to zero;
// leftover units go to the largest fractional remainders (ties -> lowest
// class id). Zero-count classes get quota 0 (reported via zero_classes).
// Quotas always sum to target_total. Requires target_total >= number of
// positive-count classes.
std::vector<std::uint64_t> class_quotas(const std::vector<std::uint64_t>& train_counts,
                                        std::uint64_t target_total,
                                        std::vector<int>* zero_classes = nullptr);

// 100x for small tasks, 10x otherwise; an explicit cfg.multiplier wins.
std::uint64_t choose_multiplier(std::uint64_t train_size, const AugmentConfig& cfg);

struct ClassShortfall {
  int label = 0;
  std::uint64_t quota = 0;
  std::uint64_t available = 0;
};

struct FilterResult {
  std::vector<SyntheticExample> selected;
  std::vector<ClassShortfall> shortfalls;
  std::uint64_t excluded_train_overlap = 0;
};

// Per class, the quota highest-confidence candidates (ties -> lower sentence
// id); candidates matching a training text (normalized) are excluded first.
// Shortfall either throws or is reported, per allow_shortfall. Output keeps
// selection order: class by class, confidence descending.
FilterResult filter_synthetic(const std::vector<SyntheticExample>& pool,
                              const std::vector<std::uint64_t>& quotas,
                              const std::vector<std::string>& train_texts, bool allow_shortfall);

}  // namespace retaug
