#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "retaug/augment.hpp"
#include "retaug/bank.hpp"
#include "retaug/classifier.hpp"
#include "retaug/dataset.hpp"
#include "retaug/embedder.hpp"
#include "retaug/eval.hpp"
#include "retaug/index.hpp"
#include "retaug/queries.hpp"
#include "retaug/report.hpp"

namespace retaug {

// Everything a protocol run needs: datasets with cached features, plus the
// deduplicated, test-overlap-free, embedded bank.
struct TaskContext {
  LabeledDataset train, valid, test;
  SentenceBank bank;  // vectors present, same encoder as the queries
  Encoder encoder;

  std::vector<Vec> train_x;  // embeddable examples only
  std::vector<int> train_y;
  std::vector<Vec> test_x;  // aligned with test.examples; empty Vec when null
  std::vector<int> test_y;
  std::vector<Vec> valid_x;
  std::vector<int> valid_y;
};

// Dedups the bank, removes test overlap, embeds bank rows and datasets.
TaskContext prepare_task_context(LabeledDataset train, LabeledDataset valid, LabeledDataset test,
                                 const std::vector<std::string>& bank_sentences, Encoder encoder);

struct ProtocolConfig {
  std::uint64_t base_seed = 0;
  int n_seeds = 5;
  QueryMode query_mode = QueryMode::label_average;
  std::uint64_t multiplier = 0;  // 0: 100x/10x rule by train size
  std::uint64_t small_task_threshold = 5000;
  bool allow_shortfall = true;
  bool soft_labels = true;  // teacher distribution vs argmax one-hot
  std::vector<std::uint32_t> teacher_hidden{256};
  std::vector<std::uint32_t> student_hidden{256};
  int teacher_epochs = 120;
  int student_epochs = 20;
  double learning_rate = 0.1;
  std::size_t batch_size = 32;
  std::uint64_t pool_per_query = 0;  // 0: 20x the augment budget, split over queries
  unsigned index_threads = 0;        // 0: hardware concurrency
};

// Teacher on labeled data; retrieve, annotate, confidence-filter; student of
// the same capacity trained on the synthetic set alone (KL on soft labels by
// default). One teacher/student pair per seed.
ExperimentReport run_self_training(const TaskContext& ctx, const ProtocolConfig& cfg);

enum class UnlabeledSource { retrieved, random, ground_truth_pool };
UnlabeledSource parse_unlabeled_source(std::string_view name);

// Same flow with a strictly smaller student (linear by default). The
// candidate pool comes from retrieval, a uniform bank sample of equal size,
// or a caller-supplied in-domain sentence pool.
ExperimentReport run_distillation(const TaskContext& ctx, const ProtocolConfig& cfg,
                                  UnlabeledSource source,
                                  const std::vector<std::string>* gt_pool = nullptr);

struct FewShotSpec {
  std::uint32_t n_per_class = 20;
  int n_train_sets = 5;
  std::uint32_t n_valid = 200;
  int n_seeds = 10;
  int top_models = 3;  // ranked by validation accuracy
  int epochs = 50;
  std::uint64_t pool_factor = 1000;    // pool = pool_factor x train-set size
  std::uint64_t augment_factor = 10;   // synthetic sample = augment_factor x size
  bool discrete_labels = true;
  bool include_ground_truth = true;
  std::uint64_t base_seed = 0;
  std::vector<std::uint32_t> hidden{256};  // teacher and student share the arch
  double learning_rate = 0.1;
  std::size_t batch_size = 32;
  unsigned index_threads = 0;
};

// Small-data protocol: disjoint-where-possible train subsets, a stratified
// validation sample, many init seeds, aggregate = mean test accuracy of the
// top models per train set. Reports baseline (teacher-only) and self-trained
// variants.
ExperimentReport run_few_shot(const TaskContext& ctx, const FewShotSpec& spec);

// Count of synthetic texts whose normalized form appears among the test
// texts. Throws when nonzero; records the check in the report otherwise.
std::uint64_t assert_no_leakage(const std::vector<const std::string*>& synthetic_texts,
                                const LabeledDataset& test);

// Stratified sample preserving the label distribution (largest-remainder
// rounding), deterministic per seed. Returns example indices.
std::vector<std::size_t> stratified_sample(const LabeledDataset& data, std::uint64_t n,
                                           std::uint64_t seed);

}  // namespace retaug
