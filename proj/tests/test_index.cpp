#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "retaug/index.hpp"
#include "retaug/vectors.hpp"

using namespace retaug;
namespace fs = std::filesystem;

namespace {

EmbeddingMatrix random_unit_bank(std::uint32_t dim, std::uint64_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto m = EmbeddingMatrix::zeros(dim, count, Dtype::f32);
  for (std::uint64_t r = 0; r < count; ++r) {
    Vec v = random_unit_vec(rng, dim);
    m.set_row(r, v);
  }
  return m;
}

// Reference scan: full float32 dot products, straight sort.
std::vector<Hit> naive_top_k(const EmbeddingMatrix& m, const Vec& q, std::size_t k) {
  std::vector<Hit> all;
  for (std::uint64_t r = 0; r < m.count; ++r) {
    if (m.is_null(r)) continue;
    all.push_back({r, dot_f32(m.f32.data() + r * m.dim, q.data(), m.dim)});
  }
  std::sort(all.begin(), all.end(), [](const Hit& a, const Hit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

}  // namespace

TEST_CASE("top_k equals the naive scan on float32 banks") {
  auto bank = random_unit_bank(16, 2000, 11);
  bank.set_null(100);
  bank.set_null(1999);
  FlatIndex index(MatrixViewRef::over(bank), 256);

  std::mt19937_64 rng(22);
  for (int qi = 0; qi < 20; ++qi) {
    Vec q = random_unit_vec(rng, 16);
    auto got = index.top_k(q, 10);
    auto want = naive_top_k(bank, q, 10);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].id == want[i].id);
      CHECK(got[i].score == want[i].score);  // same dot routine → bitwise equal
    }
  }
}

TEST_CASE("ties break to the ascending id") {
  auto m = EmbeddingMatrix::zeros(2, 5);
  // Three identical rows, two fillers.
  m.set_row(0, std::vector<float>{0, 1});
  m.set_row(1, std::vector<float>{1, 0});
  m.set_row(2, std::vector<float>{1, 0});
  m.set_row(3, std::vector<float>{1, 0});
  m.set_row(4, std::vector<float>{0, -1});
  FlatIndex index(MatrixViewRef::over(m));
  auto hits = index.top_k(Vec{1, 0}, 3);
  REQUIRE(hits.size() == 3);
  CHECK(hits[0].id == 1);
  CHECK(hits[1].id == 2);
  CHECK(hits[2].id == 3);
}

TEST_CASE("results do not depend on shard size or thread count") {
  auto bank = random_unit_bank(8, 3000, 33);
  Vec q;
  {
    std::mt19937_64 rng(44);
    q = random_unit_vec(rng, 8);
  }
  auto reference = FlatIndex(MatrixViewRef::over(bank), 1u << 16, 10, 1).top_k(q, 25);
  for (std::size_t shard : {64u, 100u, 1024u, 4096u}) {
    for (unsigned threads : {1u, 2u, 4u}) {
      auto hits = FlatIndex(MatrixViewRef::over(bank), shard, 10, threads).top_k(q, 25);
      REQUIRE(hits.size() == reference.size());
      for (std::size_t i = 0; i < hits.size(); ++i) {
        CHECK(hits[i].id == reference[i].id);
        CHECK(hits[i].score == reference[i].score);
      }
    }
  }
}

TEST_CASE("top_k_multi equals per-query top_k") {
  auto bank = random_unit_bank(12, 1500, 55);
  std::mt19937_64 rng(66);
  std::vector<Vec> queries;
  for (int i = 0; i < 7; ++i) queries.push_back(random_unit_vec(rng, 12));
  FlatIndex index(MatrixViewRef::over(bank), 512, 10, 2);
  auto multi = index.top_k_multi(queries, 8);
  REQUIRE(multi.size() == 7);
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    auto single = index.top_k(queries[qi], 8);
    REQUIRE(multi[qi].size() == single.size());
    for (std::size_t i = 0; i < single.size(); ++i) {
      CHECK(multi[qi][i].id == single[i].id);
      CHECK(multi[qi][i].score == single[i].score);
    }
  }
}

TEST_CASE("fewer than k results when the bank is small") {
  auto bank = random_unit_bank(4, 3, 77);
  bank.set_null(1);
  FlatIndex index(MatrixViewRef::over(bank));
  auto hits = index.top_k(Vec{1, 0, 0, 0}, 10);
  CHECK(hits.size() == 2);
}

TEST_CASE("input validation") {
  auto bank = random_unit_bank(4, 10, 88);
  FlatIndex index(MatrixViewRef::over(bank));
  CHECK_THROWS_AS(index.top_k(Vec{0, 0, 0, 0}, 5), std::invalid_argument);  // zero query
  CHECK_THROWS_AS(index.top_k(Vec{1, 0}, 5), std::invalid_argument);        // dim mismatch
  CHECK_THROWS_AS(index.top_k(Vec{1, 0, 0, 0}, 0), std::invalid_argument);  // k < 1
  CHECK_THROWS_AS(index.top_k_multi({}, 5), std::invalid_argument);         // no queries
}

TEST_CASE("quantize uses per-row max-abs scaling") {
  auto m = EmbeddingMatrix::zeros(3, 2);
  m.set_row(0, std::vector<float>{0.5f, -1.0f, 0.25f});
  m.set_row(1, std::vector<float>{2.0f, 0.0f, -2.0f});
  auto q = quantize(m);
  CHECK(q.dtype == Dtype::i8);
  CHECK(q.scales[0] == doctest::Approx(1.0 / 127.0));
  CHECK(q.i8[0 * 3 + 1] == -127);
  CHECK(q.i8[0 * 3 + 0] == 64);  // round(0.5 * 127) = 64
  CHECK(q.scales[1] == doctest::Approx(2.0 / 127.0));
  CHECK(q.i8[1 * 3 + 0] == 127);
  CHECK(q.i8[1 * 3 + 2] == -127);
}

TEST_CASE("quantize keeps null rows null and rejects int8 input") {
  auto m = EmbeddingMatrix::zeros(2, 3);
  m.set_row(0, std::vector<float>{1, 0});
  m.set_row(2, std::vector<float>{0, 1});
  auto q = quantize(m);
  CHECK(q.is_null(1));
  CHECK(q.scales[1] == 0.0f);
  CHECK_FALSE(q.is_null(0));
  CHECK_THROWS_AS(quantize(q), std::invalid_argument);
}

TEST_CASE("int8 retrieval with generous rescoring matches a dequantized scan") {
  auto bank = random_unit_bank(24, 4000, 99);
  auto quantized = quantize(bank);
  // reference: exact float scan over the dequantized rows — with the rescore
  // pool spanning the whole bank, the index must reproduce it id for id
  auto deq = EmbeddingMatrix::zeros(24, 4000);
  for (std::uint64_t i = 0; i < 4000; ++i) deq.set_row(i, quantized.dequant_row(i));
  FlatIndex exact(MatrixViewRef::over(deq), 512);
  FlatIndex i8(MatrixViewRef::over(quantized), 512, 4000, 3);

  std::mt19937_64 rng(111);
  for (int qi = 0; qi < 5; ++qi) {
    Vec q = random_unit_vec(rng, 24);
    auto want = exact.top_k(q, 20);
    auto got = i8.top_k(q, 20);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(got[i].id == want[i].id);
  }
}

TEST_CASE("int8 recall at small rescore factors stays high") {
  auto bank = random_unit_bank(32, 20000, 123);
  auto quantized = quantize(bank);
  FlatIndex exact(MatrixViewRef::over(bank));
  FlatIndex i8(MatrixViewRef::over(quantized), 1u << 16, 10);

  std::mt19937_64 rng(321);
  std::size_t inter = 0, total = 0;
  for (int qi = 0; qi < 10; ++qi) {
    Vec q = random_unit_vec(rng, 32);
    auto want = exact.top_k(q, 50);
    auto got = i8.top_k(q, 50);
    std::vector<std::uint64_t> w, g;
    for (auto& h : want) w.push_back(h.id);
    for (auto& h : got) g.push_back(h.id);
    std::sort(w.begin(), w.end());
    std::sort(g.begin(), g.end());
    std::vector<std::uint64_t> common;
    std::set_intersection(w.begin(), w.end(), g.begin(), g.end(), std::back_inserter(common));
    inter += common.size();
    total += want.size();
  }
  CHECK(double(inter) / double(total) >= 0.95);
}

TEST_CASE("scanning a mapped file matches the in-memory scan") {
  auto bank = random_unit_bank(8, 500, 222);
  bank.set_null(250);
  auto path = (fs::temp_directory_path() /
               ("retaug_idx_" + std::to_string(std::random_device{}()) + ".vec"))
                  .string();
  write_vectors(bank, path);
  auto mv = MappedVectors::open(path);
  FlatIndex from_mem(MatrixViewRef::over(bank), 128);
  FlatIndex from_map(MatrixViewRef::over(mv), 128);

  std::mt19937_64 rng(333);
  Vec q = random_unit_vec(rng, 8);
  auto a = from_mem.top_k(q, 12);
  auto b = from_map.top_k(q, 12);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id == b[i].id);
    CHECK(a[i].score == b[i].score);
  }
  fs::remove(path);
}
