#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "retaug/common.hpp"
#include "retaug/embedder.hpp"

namespace retaug {

// Post-softmax class distribution: non-negative, sums to 1 within 1e-6.
using SoftLabel = std::vector<double>;

double kl_div(const SoftLabel& target, const SoftLabel& predicted);
double cross_entropy(int target_class, const SoftLabel& predicted);

// argmax with ties broken to the lowest class id
int argmax_class(const SoftLabel& probs);

// Feed-forward softmax classifier over sentence embeddings. Hidden layers
// use tanh; an empty hidden_dims gives a plain linear model. Parameters are
// kept in double so training and finite-difference checks share precision;
// the on-disk format is float32.
class Classifier {
 public:
  struct Layer {
    std::uint32_t in = 0, out = 0;
    std::vector<double> w;  // out x in, row-major
    std::vector<double> b;  // out
  };

  Classifier() = default;
  // Weights uniform in ±1/sqrt(fan_in), biases zero, deterministic per seed.
  static Classifier init(std::uint32_t input_dim, const std::vector<std::uint32_t>& hidden_dims,
                         std::uint32_t num_classes, std::uint64_t seed);

  std::uint32_t input_dim() const { return input_dim_; }
  std::uint32_t num_classes() const { return num_classes_; }
  const std::vector<std::uint32_t>& hidden_dims() const { return hidden_dims_; }
  std::size_t param_count() const;
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  SoftLabel forward(std::span<const float> x) const;
  SoftLabel forward(std::span<const double> x) const;

  void save(const std::string& path) const;  // magic "SAMD"
  static Classifier load(const std::string& path);

 private:
  std::uint32_t input_dim_ = 0;
  std::uint32_t num_classes_ = 0;
  std::vector<std::uint32_t> hidden_dims_;
  std::vector<Layer> layers_;
};

enum class LossKind { cross_entropy, kl };
LossKind parse_loss(std::string_view name);  // "ce" | "kl"

struct TrainSpec {
  LossKind loss = LossKind::cross_entropy;
  int epochs = 100;
  std::size_t batch_size = 32;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
};

struct TrainResult {
  Classifier model;
  std::vector<double> epoch_loss;  // mean loss per epoch
  double final_loss = 0.0;
};

// Mini-batch SGD from seeded initialization. Deterministic given the seed;
// aborts with a diagnostic if the loss turns non-finite. Exactly one of
// hard_labels / soft_labels must match spec.loss.
TrainResult train_classifier(std::uint32_t input_dim, const std::vector<std::uint32_t>& hidden_dims,
                             std::uint32_t num_classes, const std::vector<Vec>& features,
                             const std::vector<int>& hard_labels,
                             const std::vector<SoftLabel>& soft_labels, const TrainSpec& spec);

// Gradient of the batch-mean loss w.r.t. every parameter, flattened in layer
// order (w then b per layer). Exposed for the finite-difference checks.
double batch_loss_and_grad(const Classifier& model, const std::vector<Vec>& features,
                           const std::vector<int>& hard_labels,
                           const std::vector<SoftLabel>& soft_labels, LossKind loss,
                           const std::vector<std::size_t>& batch, std::vector<double>* grad);

// Teacher output for one retrieved sentence.
struct SyntheticExample {
  std::uint64_t id = 0;  // originating bank sentence id
  std::string text;
  SoftLabel probs;
  double confidence = 0.0;  // max(probs)
  int assigned_class = 0;   // argmax, ties -> lowest id
};

struct AnnotateResult {
  std::vector<SyntheticExample> examples;
  std::size_t dropped = 0;  // sentences that failed to embed
};

AnnotateResult annotate(const Classifier& model, const std::vector<std::string>& sentences,
                        const Encoder& encoder, const std::vector<std::uint64_t>* ids = nullptr);
// Feature-level variant used when embeddings are already at hand.
SyntheticExample annotate_one(const Classifier& model, std::uint64_t id, std::string text,
                              std::span<const float> feature);

// JSON Lines: {"id": n, "text": s, "probs": [...], "confidence": x} per
// example, probabilities printed with 8 significant digits.
void write_synthetic(const std::vector<SyntheticExample>& examples, const std::string& path);
std::vector<SyntheticExample> read_synthetic(const std::string& path);

}  // namespace retaug
