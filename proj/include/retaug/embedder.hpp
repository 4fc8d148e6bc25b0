#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "retaug/common.hpp"
#include "retaug/word_vectors.hpp"

namespace retaug {

// ---------------------------------------------------------------------------
// Word-average backend

// Mean of in-vocabulary token vectors, L2-normalized. Null when no token is
// in vocabulary (or the mean cancels to zero).
std::optional<Vec> embed_avg(std::string_view sentence, const WordVectorTable& table);

// ---------------------------------------------------------------------------
// SIF backend: frequency-weighted average with common-component removal.

struct SifParams {
  double a = 1e-3;
  Vec pc;  // unit-norm top principal component of the sample
  double eigenvalue = 0.0;
};

// Unnormalized weighted average with weight a/(a + p(w)) per in-vocabulary
// token. This is the raw form fit_sif consumes. Requires estimated unigram
// probabilities.
std::optional<std::vector<double>> sif_raw_average(std::string_view sentence,
                                                   const WordVectorTable& table, double a);

// Top principal component of the (uncentered) sample via power iteration,
// 100 iterations or relative change < 1e-9. Requires at least 1000 sample
// vectors; throws on a degenerate (all-zero) sample.
SifParams fit_sif(const std::vector<std::vector<double>>& sample, double a);

std::optional<Vec> embed_sif(std::string_view sentence, const WordVectorTable& table,
                             const SifParams& params);

void save_sif(const SifParams& params, const WordVectorTable& table, const std::string& path);
SifParams load_sif(const std::string& path, WordVectorTable& table);

// ---------------------------------------------------------------------------
// Triplet objective

struct TrainingTriple {
  Vec x;    // anchor
  Vec y;    // positive
  Vec y_c;  // in-batch hard negative
};

// max(0, alpha - cos(x,y) + cos(x,y_c))
double triplet_loss(const TrainingTriple& t, double alpha);
double triplet_loss(std::span<const float> x, std::span<const float> y,
                    std::span<const float> y_c, double alpha);

// argmax over j != own_index of cos(anchor, batch_positives[j]); ties break
// to the smallest index. Throws when the batch has fewer than 2 elements.
std::size_t hard_negative(std::span<const float> anchor, const std::vector<Vec>& batch_positives,
                          std::size_t own_index);

// ---------------------------------------------------------------------------
// Trainable linear projection over word-average features

struct TripletConfig {
  double margin = 0.4;
  std::size_t batch_size = 32;
  double learning_rate = 0.05;
  int epochs = 10;
  std::uint64_t seed = 0;
};

struct ProjectionEncoder {
  std::uint32_t d_in = 0;
  std::uint32_t d_out = 0;
  std::vector<double> w;  // d_out x d_in, row-major

  static ProjectionEncoder identity(std::uint32_t d);
  static ProjectionEncoder random_init(std::uint32_t d_out, std::uint32_t d_in, std::uint64_t seed);

  // normalize(W * embed_avg(sentence)); null propagates from the base backend.
  std::optional<Vec> encode(std::string_view sentence, const WordVectorTable& table) const;
  std::optional<Vec> project(std::span<const float> features) const;

  void save(const std::string& path) const;  // magic "SAPJ", float32 payload
  static ProjectionEncoder load(const std::string& path);
};

// Mean triplet loss over a batch with the given fixed hard-negative
// assignment; optionally accumulates the analytic gradient w.r.t. W.
// fx/fy hold one unit-norm feature row per pair.
double projection_batch_loss(const std::vector<double>& w, std::uint32_t d_out, std::uint32_t d_in,
                             const std::vector<Vec>& fx, const std::vector<Vec>& fy,
                             const std::vector<std::size_t>& negatives, double alpha,
                             std::vector<double>* grad = nullptr);

// Hard negatives for a batch under the current projection.
std::vector<std::size_t> assign_hard_negatives(const std::vector<double>& w, std::uint32_t d_out,
                                               std::uint32_t d_in, const std::vector<Vec>& fx,
                                               const std::vector<Vec>& fy);

struct TrainProjectionResult {
  ProjectionEncoder encoder;
  std::vector<double> epoch_loss;
  std::size_t pairs_used = 0;
  std::size_t pairs_dropped = 0;  // null on either side
};

// Mini-batch gradient descent on the mean triplet loss with in-batch hard
// negatives, recomputed every step. Deterministic given cfg.seed. W starts
// as identity when d_out == d_in, else seeded uniform. Throws when every
// pair fails to embed.
TrainProjectionResult train_projection(const std::vector<std::pair<std::string, std::string>>& pairs,
                                       const WordVectorTable& table, const TripletConfig& cfg,
                                       std::uint32_t d_out = 0 /* 0: same as input */);

// ---------------------------------------------------------------------------
// Backend dispatch

class Encoder {
 public:
  enum class Backend { avg, sif, proj };
  static Backend parse_backend(std::string_view name);  // throws on unknown name
  static const char* backend_name(Backend b);

  Encoder() = default;
  Encoder(Backend backend, std::shared_ptr<const WordVectorTable> table,
          std::optional<SifParams> sif = std::nullopt,
          std::optional<ProjectionEncoder> proj = std::nullopt);

  std::optional<Vec> encode(std::string_view sentence) const;
  std::uint32_t dim() const;
  Backend backend() const { return backend_; }
  const WordVectorTable& table() const { return *table_; }

 private:
  Backend backend_ = Backend::avg;
  std::shared_ptr<const WordVectorTable> table_;
  std::optional<SifParams> sif_;
  std::optional<ProjectionEncoder> proj_;
};

}  // namespace retaug
