#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "retaug/augment.hpp"

using namespace retaug;

namespace {

SyntheticExample ex(std::uint64_t id, std::string text, double p0, double p1) {
  SyntheticExample s;
  s.id = id;
  s.text = std::move(text);
  s.probs = {p0, p1};
  s.confidence = std::max(p0, p1);
  s.assigned_class = p1 > p0 ? 1 : 0;
  return s;
}

}  // namespace

TEST_CASE("quotas follow the label ratio") {
  CHECK(class_quotas({60, 40}, 1000) == std::vector<std::uint64_t>{600, 400});
  CHECK(class_quotas({1, 1, 1}, 10) == std::vector<std::uint64_t>{4, 3, 3});
  // tiny shares still get at least one slot
  CHECK(class_quotas({99, 1}, 10) == std::vector<std::uint64_t>{9, 1});
}

TEST_CASE("quotas skip absent classes and report them") {
  std::vector<int> zeros;
  auto q = class_quotas({5, 0, 5}, 10, &zeros);
  CHECK(q == std::vector<std::uint64_t>{5, 0, 5});
  CHECK(zeros == std::vector<int>{1});
}

TEST_CASE("quota remainders go to the largest fractions, ties to the lowest class") {
  // shares 10/3 each: floors 3,3,3, one leftover -> class 0
  CHECK(class_quotas({1, 1, 1}, 10) == std::vector<std::uint64_t>{4, 3, 3});
  // 7*(2/4)=3.5, 7*(1/4)=1.75 twice: floors 3,1,1, remainders .5,.75,.75
  CHECK(class_quotas({2, 1, 1}, 7) == std::vector<std::uint64_t>{3, 2, 2});
}

TEST_CASE("quota properties hold over random instances") {
  std::mt19937_64 rng(4242);
  std::uniform_int_distribution<std::uint64_t> count(0, 500);
  std::uniform_int_distribution<int> classes(1, 8);
  for (int trial = 0; trial < 200; ++trial) {
    int k = classes(rng);
    std::vector<std::uint64_t> counts(k);
    std::uint64_t pos = 0;
    for (auto& c : counts) {
      c = count(rng);
      if (c > 0) ++pos;
    }
    if (pos == 0) counts[0] = 1, pos = 1;
    std::uniform_int_distribution<std::uint64_t> tgt(pos, pos + 2000);
    std::uint64_t target = tgt(rng);
    auto q = class_quotas(counts, target);
    CHECK(std::accumulate(q.begin(), q.end(), std::uint64_t{0}) == target);
    for (int i = 0; i < k; ++i) {
      if (counts[i] == 0)
        CHECK(q[i] == 0);
      else
        CHECK(q[i] >= 1);
    }
  }
}

TEST_CASE("quota argument validation") {
  CHECK_THROWS_AS(class_quotas({}, 10), std::invalid_argument);
  CHECK_THROWS_AS(class_quotas({1, 1, 1}, 2), std::invalid_argument);
  CHECK_THROWS_AS(class_quotas({0, 0}, 5), std::invalid_argument);
}

TEST_CASE("multiplier switches at the small-task threshold") {
  AugmentConfig cfg;
  CHECK(choose_multiplier(40, cfg) == 100);
  CHECK(choose_multiplier(4999, cfg) == 100);
  CHECK(choose_multiplier(5000, cfg) == 10);
  CHECK(choose_multiplier(100000, cfg) == 10);
  cfg.small_task_threshold = 100;
  CHECK(choose_multiplier(99, cfg) == 100);
  CHECK(choose_multiplier(100, cfg) == 10);
  cfg.multiplier = 7;
  CHECK(choose_multiplier(40, cfg) == 7);
  CHECK(choose_multiplier(100000, cfg) == 7);
}

TEST_CASE("filter keeps the most confident per class") {
  std::vector<SyntheticExample> pool = {
      ex(1, "a one", 0.9, 0.1),  ex(2, "a two", 0.7, 0.3),  ex(3, "a three", 0.95, 0.05),
      ex(4, "b one", 0.2, 0.8),  ex(5, "b two", 0.35, 0.65), ex(6, "b three", 0.1, 0.9),
  };
  auto res = filter_synthetic(pool, {2, 1}, {}, false);
  REQUIRE(res.selected.size() == 3);
  // class 0 first: ids 3 (0.95) then 1 (0.9); class 1: id 6 (0.9)
  CHECK(res.selected[0].id == 3);
  CHECK(res.selected[1].id == 1);
  CHECK(res.selected[2].id == 6);
  CHECK(res.shortfalls.empty());
  CHECK(res.excluded_train_overlap == 0);
}

TEST_CASE("filter breaks confidence ties by lower id") {
  std::vector<SyntheticExample> pool = {
      ex(9, "x", 0.8, 0.2),
      ex(4, "y", 0.8, 0.2),
      ex(7, "z", 0.8, 0.2),
  };
  auto res = filter_synthetic(pool, {2, 0}, {}, false);
  REQUIRE(res.selected.size() == 2);
  CHECK(res.selected[0].id == 4);
  CHECK(res.selected[1].id == 7);
}

TEST_CASE("training texts are excluded before ranking") {
  std::vector<SyntheticExample> pool = {
      ex(1, "Seen  Before", 0.99, 0.01),  // normalizes onto a train text
      ex(2, "fresh line", 0.6, 0.4),
      ex(3, "another fresh", 0.55, 0.45),
  };
  auto res = filter_synthetic(pool, {2, 0}, {"seen before"}, false);
  REQUIRE(res.selected.size() == 2);
  CHECK(res.selected[0].id == 2);
  CHECK(res.selected[1].id == 3);
  CHECK(res.excluded_train_overlap == 1);
}

TEST_CASE("shortfall either throws or is reported") {
  std::vector<SyntheticExample> pool = {
      ex(1, "a", 0.9, 0.1),
      ex(2, "b", 0.3, 0.7),
  };
  CHECK_THROWS_AS(filter_synthetic(pool, {3, 1}, {}, false), std::runtime_error);
  auto res = filter_synthetic(pool, {3, 1}, {}, true);
  REQUIRE(res.selected.size() == 2);
  REQUIRE(res.shortfalls.size() == 1);
  CHECK(res.shortfalls[0].label == 0);
  CHECK(res.shortfalls[0].quota == 3);
  CHECK(res.shortfalls[0].available == 1);
}

TEST_CASE("filter output matches quotas whenever candidates suffice") {
  std::mt19937_64 rng(1717);
  std::uniform_real_distribution<double> conf(0.0, 1.0);
  std::uniform_int_distribution<int> classes(2, 5);
  for (int trial = 0; trial < 100; ++trial) {
    int k = classes(rng);
    std::uniform_int_distribution<std::uint64_t> count(1, 40);
    std::vector<std::uint64_t> counts(k);
    for (auto& c : counts) c = count(rng);
    std::uint64_t total =
        std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
    std::uniform_int_distribution<std::uint64_t> tgt(k, 3 * total);
    auto quotas = class_quotas(counts, tgt(rng));

    std::vector<SyntheticExample> pool;
    std::uint64_t id = 1;
    for (int c = 0; c < k; ++c) {
      for (std::uint64_t i = 0; i < quotas[c] + 5; ++i) {
        SyntheticExample s;
        s.id = id;
        s.text = "sentence " + std::to_string(id);
        s.probs.assign(k, 0.0);
        double top = 0.5 + 0.5 * conf(rng);
        s.probs[c] = top;
        for (int o = 0; o < k; ++o)
          if (o != c) s.probs[o] = (1.0 - top) / (k - 1);
        s.confidence = top;
        s.assigned_class = c;
        pool.push_back(std::move(s));
        ++id;
      }
    }
    std::shuffle(pool.begin(), pool.end(), rng);

    auto res = filter_synthetic(pool, quotas, {}, false);
    std::vector<std::uint64_t> got(k, 0);
    for (const auto& s : res.selected) ++got[static_cast<std::size_t>(s.assigned_class)];
    CHECK(got == quotas);
    CHECK(res.shortfalls.empty());
  }
}

TEST_CASE("selected order is class-major, confidence descending") {
  std::vector<SyntheticExample> pool = {
      ex(1, "c0 low", 0.6, 0.4),   ex(2, "c1 hi", 0.05, 0.95),
      ex(3, "c0 hi", 0.9, 0.1),    ex(4, "c1 low", 0.45, 0.55),
  };
  auto res = filter_synthetic(pool, {2, 2}, {}, false);
  REQUIRE(res.selected.size() == 4);
  CHECK(res.selected[0].id == 3);
  CHECK(res.selected[1].id == 1);
  CHECK(res.selected[2].id == 2);
  CHECK(res.selected[3].id == 4);
}
