#include "retaug/common.hpp"

namespace retaug {

bool l2_normalize(Vec& v) {
  double n = l2_norm(v);
  if (n == 0.0) return false;
  float inv = float(1.0 / n);
  for (auto& x : v) x *= inv;
  return true;
}

bool l2_normalize(std::vector<double>& v) {
  double n = l2_norm(v);
  if (n == 0.0) return false;
  for (auto& x : v) x /= n;
  return true;
}

double cosine(std::span<const float> a, std::span<const float> b) {
  double na = l2_norm(a), nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dotd(a, b) / (na * nb);
}

Vec random_unit_vec(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<float> nd(0.0f, 1.0f);
  Vec v(dim);
  do {
    for (auto& x : v) x = nd(rng);
  } while (!l2_normalize(v));
  return v;
}

double mean_of(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / double(xs.size());
}

double pop_std(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / double(xs.size()));
}

}  // namespace retaug
