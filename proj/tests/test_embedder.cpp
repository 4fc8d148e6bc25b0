#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "retaug/embedder.hpp"

using namespace retaug;
namespace fs = std::filesystem;

namespace {

WordVectorTable axis_table() {
  WordVectorTable t;
  t.dim = 3;
  t.add("x", std::vector<float>{1, 0, 0});
  t.add("y", std::vector<float>{0, 1, 0});
  t.add("z", std::vector<float>{0, 0, 1});
  t.add("negx", std::vector<float>{-1, 0, 0});
  return t;
}

// Dense symmetric eigensolver used as an oracle for the power iteration:
// cyclic Jacobi rotations until off-diagonal mass vanishes.
std::pair<double, std::vector<double>> jacobi_top_eigen(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-26) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::fabs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (a[i][i] > a[best][best]) best = i;
  std::vector<double> vec(n);
  for (std::size_t i = 0; i < n; ++i) vec[i] = v[i][best];
  return {a[best][best], vec};
}

}  // namespace

TEST_CASE("embed_avg averages in-vocabulary tokens and normalizes") {
  auto t = axis_table();
  auto v = embed_avg("x y unknown", t);
  REQUIRE(v.has_value());
  // mean of (1,0,0),(0,1,0) normalized → (1/√2, 1/√2, 0)
  CHECK((*v)[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK((*v)[1] == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK((*v)[2] == doctest::Approx(0.0));
}

TEST_CASE("embed_avg is null without vocabulary hits or on exact cancellation") {
  auto t = axis_table();
  CHECK_FALSE(embed_avg("nothing known here", t).has_value());
  CHECK_FALSE(embed_avg("", t).has_value());
  CHECK_FALSE(embed_avg("x negx", t).has_value());  // cancels to zero
}

TEST_CASE("sif_raw_average weights tokens by a/(a+p)") {
  auto t = axis_table();
  std::vector<std::string> corpus = {"x x x y"};  // p(x)=0.75, p(y)=0.25
  t.estimate_unigram(corpus);
  const double a = 1e-3;
  auto raw = sif_raw_average("x y", t, a);
  REQUIRE(raw.has_value());
  const double wx = a / (a + 0.75), wy = a / (a + 0.25);
  CHECK((*raw)[0] == doctest::Approx(wx / (wx + wy)));
  CHECK((*raw)[1] == doctest::Approx(wy / (wx + wy)));
  CHECK_FALSE(sif_raw_average("unknown", t, a).has_value());
}

TEST_CASE("fit_sif matches a Jacobi eigensolver on the uncentered second moment") {
  const std::uint32_t dim = 8;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  // Anisotropic sample: strong common direction plus noise.
  std::vector<double> common(dim);
  for (auto& c : common) c = g(rng);
  std::vector<std::vector<double>> sample;
  for (int i = 0; i < 1500; ++i) {
    std::vector<double> v(dim);
    const double mix = 1.0 + 0.3 * g(rng);
    for (std::uint32_t d = 0; d < dim; ++d) v[d] = mix * common[d] + 0.5 * g(rng);
    sample.push_back(std::move(v));
  }

  auto params = fit_sif(sample, 1e-3);
  REQUIRE(params.pc.size() == dim);

  // same matrix the power iteration uses: the summed outer products
  std::vector<std::vector<double>> m(dim, std::vector<double>(dim, 0.0));
  for (const auto& v : sample)
    for (std::uint32_t i = 0; i < dim; ++i)
      for (std::uint32_t j = 0; j < dim; ++j) m[i][j] += v[i] * v[j];
  auto [eig, vec] = jacobi_top_eigen(m);

  CHECK(params.eigenvalue == doctest::Approx(eig).epsilon(1e-6));
  // Eigenvectors match up to sign.
  double dot = 0.0;
  for (std::uint32_t d = 0; d < dim; ++d) dot += double(params.pc[d]) * vec[d];
  CHECK(std::fabs(dot) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("fit_sif rejects small or degenerate samples") {
  std::vector<std::vector<double>> tiny(10, std::vector<double>(4, 1.0));
  CHECK_THROWS(fit_sif(tiny, 1e-3));
  std::vector<std::vector<double>> zeros(1200, std::vector<double>(4, 0.0));
  CHECK_THROWS(fit_sif(zeros, 1e-3));
}

TEST_CASE("embed_sif removes the common component") {
  auto t = axis_table();
  std::vector<std::string> corpus = {"x y z"};
  t.estimate_unigram(corpus);
  SifParams params;
  params.a = 1e-3;
  params.pc = {1, 0, 0};  // pretend the common direction is pure x
  params.eigenvalue = 1.0;
  auto v = embed_sif("x y", t, params);
  REQUIRE(v.has_value());
  // The x component is projected out, leaving pure y after normalization.
  CHECK((*v)[0] == doctest::Approx(0.0));
  CHECK((*v)[1] == doctest::Approx(1.0));
  // A sentence that is all common component becomes null.
  CHECK_FALSE(embed_sif("x", t, params).has_value());
}

TEST_CASE("sif parameters round trip through disk") {
  auto t = axis_table();
  std::vector<std::string> corpus = {"x x y z"};
  t.estimate_unigram(corpus);
  SifParams params;
  params.a = 2e-3;
  params.pc = {0.6f, 0.8f, 0.0f};
  params.eigenvalue = 1.25;

  auto path = (fs::temp_directory_path() /
               ("retaug_sif_" + std::to_string(std::random_device{}()) + ".bin"))
                  .string();
  save_sif(params, t, path);
  WordVectorTable fresh = axis_table();
  auto back = load_sif(path, fresh);
  fs::remove(path);

  CHECK(back.a == params.a);
  CHECK(back.eigenvalue == params.eigenvalue);
  CHECK(back.pc == params.pc);
  REQUIRE(fresh.has_probs());
  CHECK(fresh.prob("x") == doctest::Approx(t.prob("x")));
}

TEST_CASE("triplet loss hinges at the margin") {
  Vec x = {1, 0}, y = {1, 0}, far = {0, 1};
  // cos(x,y)=1, cos(x,far)=0 → max(0, 0.4 - 1 + 0) = 0
  CHECK(triplet_loss(x, y, far, 0.4) == 0.0);
  // Swap: positive is orthogonal, negative identical → 0.4 - 0 + 1 = 1.4
  CHECK(triplet_loss(x, far, y, 0.4) == doctest::Approx(1.4));
  TrainingTriple t{x, far, y};
  CHECK(triplet_loss(t, 0.4) == doctest::Approx(1.4));
}

TEST_CASE("hard_negative picks the most similar other positive, ties to smallest index") {
  Vec anchor = {1, 0};
  std::vector<Vec> batch = {{1, 0}, {0.9f, 0.1f}, {0, 1}, {0.9f, 0.1f}};
  CHECK(hard_negative(anchor, batch, 0) == 1);  // index 3 ties, 1 wins
  CHECK(hard_negative(anchor, batch, 1) == 0);  // identical vector at 0 is the hardest
  CHECK_THROWS(hard_negative(anchor, {{1.0f, 0.0f}}, 0));
}

TEST_CASE("projection_batch_loss gradient matches central finite differences") {
  const std::uint32_t d_in = 5, d_out = 4;
  std::mt19937_64 rng(123);
  std::normal_distribution<double> g(0.0, 1.0);

  for (int inst = 0; inst < 20; ++inst) {
    std::vector<double> w(std::size_t(d_out) * d_in);
    for (auto& v : w) v = g(rng) * 0.5;
    const std::size_t n = 6;
    std::vector<Vec> fx(n, Vec(d_in)), fy(n, Vec(d_in));
    auto fill_unit = [&](Vec& v) {
      double norm = 0.0;
      for (auto& e : v) {
        e = float(g(rng));
        norm += double(e) * e;
      }
      norm = std::sqrt(norm);
      for (auto& e : v) e = float(e / norm);
    };
    for (std::size_t i = 0; i < n; ++i) {
      fill_unit(fx[i]);
      fill_unit(fy[i]);
    }
    auto negatives = assign_hard_negatives(w, d_out, d_in, fx, fy);

    std::vector<double> grad(w.size(), 0.0);
    projection_batch_loss(w, d_out, d_in, fx, fy, negatives, 0.4, &grad);

    double max_rel = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double h = 1e-6;
      auto wp = w;
      wp[k] += h;
      auto wm = w;
      wm[k] -= h;
      const double fd = (projection_batch_loss(wp, d_out, d_in, fx, fy, negatives, 0.4) -
                         projection_batch_loss(wm, d_out, d_in, fx, fy, negatives, 0.4)) /
                        (2.0 * h);
      const double denom = std::max({std::fabs(fd), std::fabs(grad[k]), 1e-8});
      max_rel = std::max(max_rel, std::fabs(fd - grad[k]) / denom);
    }
    CHECK(max_rel < 1e-4);
  }
}

TEST_CASE("train_projection pulls paraphrase pairs together") {
  // Two topic clusters; paraphrase pairs live in the same cluster.
  WordVectorTable t;
  t.dim = 6;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  auto add_noisy = [&](const std::string& name, int axis) {
    std::vector<float> v(6);
    for (auto& e : v) e = float(0.25 * g(rng));
    v[axis] += 1.0f;
    t.add(name, v);
  };
  std::vector<std::pair<std::string, std::string>> pairs;
  for (int i = 0; i < 40; ++i) {
    add_noisy("a" + std::to_string(i), i % 3);
    add_noisy("b" + std::to_string(i), i % 3);
    pairs.emplace_back("a" + std::to_string(i), "b" + std::to_string(i));
  }
  pairs.emplace_back("a0 missingtoken", "zzz");  // drops: right side never embeds

  TripletConfig cfg;
  cfg.epochs = 12;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.1;
  cfg.seed = 3;
  auto result = train_projection(pairs, t, cfg);

  CHECK(result.pairs_used == 40);
  CHECK(result.pairs_dropped == 1);
  REQUIRE(result.epoch_loss.size() == 12);
  CHECK(result.epoch_loss.back() < result.epoch_loss.front());
  CHECK(result.encoder.d_in == 6);
  CHECK(result.encoder.d_out == 6);
}

TEST_CASE("train_projection throws when nothing embeds") {
  WordVectorTable t;
  t.dim = 2;
  t.add("known", std::vector<float>{1, 0});
  std::vector<std::pair<std::string, std::string>> pairs = {{"zzz", "qqq"}};
  CHECK_THROWS(train_projection(pairs, t, {}));
}

TEST_CASE("projection encoder round trips and projects") {
  ProjectionEncoder enc;
  enc.d_in = 3;
  enc.d_out = 2;
  enc.w = {1, 0, 0, 0, 2, 0};  // rows: (1,0,0), (0,2,0)
  auto p = enc.project(std::vector<float>{0.5f, 0.5f, 0.0f});
  REQUIRE(p.has_value());
  // W * (0.5,0.5,0) = (0.5, 1.0), normalized → (1,2)/√5
  CHECK((*p)[0] == doctest::Approx(1.0 / std::sqrt(5.0)));
  CHECK((*p)[1] == doctest::Approx(2.0 / std::sqrt(5.0)));

  auto path = (fs::temp_directory_path() /
               ("retaug_proj_" + std::to_string(std::random_device{}()) + ".bin"))
                  .string();
  enc.save(path);
  auto back = ProjectionEncoder::load(path);
  fs::remove(path);
  CHECK(back.d_in == 3);
  CHECK(back.d_out == 2);
  // Saved as float32: values here are exactly representable.
  CHECK(back.w == enc.w);

  CHECK(ProjectionEncoder::identity(3).project(std::vector<float>{0, 3, 0})->at(1) ==
        doctest::Approx(1.0));
}

TEST_CASE("encoder dispatches by backend") {
  auto table = std::make_shared<WordVectorTable>(axis_table());
  Encoder avg(Encoder::Backend::avg, table);
  CHECK(avg.dim() == 3);
  CHECK(avg.encode("x y").has_value());
  CHECK_FALSE(avg.encode("nope").has_value());

  ProjectionEncoder proj = ProjectionEncoder::identity(3);
  Encoder pe(Encoder::Backend::proj, table, std::nullopt, proj);
  auto a = avg.encode("x z");
  auto p = pe.encode("x z");
  REQUIRE(a.has_value());
  REQUIRE(p.has_value());
  for (int i = 0; i < 3; ++i) CHECK((*a)[i] == doctest::Approx((*p)[i]));

  CHECK(Encoder::parse_backend("avg") == Encoder::Backend::avg);
  CHECK(Encoder::parse_backend("sif") == Encoder::Backend::sif);
  CHECK(Encoder::parse_backend("proj") == Encoder::Backend::proj);
  CHECK_THROWS(Encoder::parse_backend("nope"));
  CHECK(std::string(Encoder::backend_name(Encoder::Backend::sif)) == "sif");
}
