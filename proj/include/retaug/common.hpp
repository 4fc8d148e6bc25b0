#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace retaug {

// Dense embedding vector. Non-null embeddings are unit L2 norm.
using Vec = std::vector<float>;

// Float accumulation, used on the retrieval hot path. Keep this the single
// scoring routine so sharded and unsharded scans produce identical floats.
inline float dot_f32(const float* a, const float* b, std::size_t n) {
  float s = 0.0f;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

// Double accumulation for embedding math and evaluation.
inline double dotd(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += double(a[i]) * double(b[i]);
  return s;
}

inline double dotd(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(std::span<const float> v) { return std::sqrt(dotd(v, v)); }
inline double l2_norm(std::span<const double> v) { return std::sqrt(dotd(v, v)); }

// Scales v to unit norm. Returns false (v untouched) when the norm is zero.
bool l2_normalize(Vec& v);
bool l2_normalize(std::vector<double>& v);

double cosine(std::span<const float> a, std::span<const float> b);

// Fast deterministic 64-bit generator for bulk synthetic data.
struct SplitMix64 {
  std::uint64_t state;
  explicit SplitMix64(std::uint64_t seed) : state(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
};

// Derives an independent stream seed, so pipeline stages do not share RNG state.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  SplitMix64 g(base * 0x9e3779b97f4a7c15ull + stream);
  g.next();
  return g.next();
}

Vec random_unit_vec(std::mt19937_64& rng, std::size_t dim);

double mean_of(std::span<const double> xs);
// Population standard deviation; reports use this form throughout.
double pop_std(std::span<const double> xs);

}  // namespace retaug
