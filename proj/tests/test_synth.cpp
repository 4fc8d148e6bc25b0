#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "retaug/common.hpp"
#include "retaug/synth.hpp"
#include "retaug/text.hpp"

using namespace retaug;

namespace {

SynthTaskConfig small_config() {
  SynthTaskConfig cfg;
  cfg.seed = 7;
  cfg.vocab_size = 30;
  cfg.n_classes = 3;
  cfg.n_train = 12;
  cfg.n_valid = 30;
  cfg.n_test = 60;
  cfg.bank_size = 400;
  cfg.distractor_ratio = 0.5;
  cfg.overlap = 0.3;
  cfg.shared_vocab = 20;
  cfg.n_distractor_topics = 4;
  cfg.len_min = 5;
  cfg.len_max = 9;
  return cfg;
}

bool in_domain_token(const std::string& tok) {
  return tok.size() >= 2 && (tok[0] == 'c' || (tok[0] == 's' && tok[1] == 'h'));
}

}  // namespace

TEST_CASE("task generation is deterministic per seed") {
  auto cfg = small_config();
  auto a = generate_synthetic_task(cfg);
  auto b = generate_synthetic_task(cfg);
  REQUIRE(a.train.size() == b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    CHECK(a.train.examples[i].text == b.train.examples[i].text);
    CHECK(a.train.examples[i].label == b.train.examples[i].label);
  }
  CHECK(a.bank_sentences == b.bank_sentences);
  CHECK(a.tokens == b.tokens);

  cfg.seed = 8;
  auto c = generate_synthetic_task(cfg);
  CHECK(a.bank_sentences != c.bank_sentences);
}

TEST_CASE("splits are balanced and labeled by class") {
  auto task = generate_synthetic_task(small_config());
  CHECK(task.train.size() == 12);
  CHECK(task.valid.size() == 30);
  CHECK(task.test.size() == 60);
  CHECK(task.train.label_names == std::vector<std::string>{"class0", "class1", "class2"});
  auto counts = task.train.label_counts();
  CHECK(counts == std::vector<std::uint64_t>{4, 4, 4});
  // uneven n still spreads as evenly as possible
  auto cfg = small_config();
  cfg.n_train = 13;
  auto task2 = generate_synthetic_task(cfg);
  CHECK(task2.train.label_counts() == std::vector<std::uint64_t>{5, 4, 4});
}

TEST_CASE("sentence lengths stay inside the configured range") {
  auto task = generate_synthetic_task(small_config());
  auto check_range = [](const std::string& text) {
    auto n = token_count(text);
    CHECK(n >= 5);
    CHECK(n <= 9);
  };
  for (const auto& ex : task.train.examples) check_range(ex.text);
  for (const auto& s : task.bank_sentences) check_range(s);
}

TEST_CASE("class sentences draw only from their own and the shared pool") {
  auto cfg = small_config();
  cfg.distractor_ratio = 0.0;
  auto task = generate_synthetic_task(cfg);
  for (const auto& ex : task.train.examples) {
    std::string want = "c" + std::to_string(ex.label);
    for (const auto& tok : tokenize(ex.text)) {
      bool shared = tok.size() >= 2 && tok[0] == 's' && tok[1] == 'h';
      bool own = tok.substr(0, want.size()) == want;
      CHECK((shared || own));
    }
  }
  for (const auto& s : task.bank_sentences)
    for (const auto& tok : tokenize(s)) CHECK(in_domain_token(std::string(tok)));
}

TEST_CASE("distractor-only banks never leak task vocabulary") {
  auto cfg = small_config();
  cfg.distractor_ratio = 1.0;
  auto task = generate_synthetic_task(cfg);
  for (const auto& s : task.bank_sentences)
    for (const auto& tok : tokenize(s)) CHECK(tok[0] == 'd');
}

TEST_CASE("zero overlap keeps class vocabularies disjoint") {
  auto cfg = small_config();
  cfg.overlap = 0.0;
  auto task = generate_synthetic_task(cfg);
  for (const auto& ex : task.train.examples) {
    std::string want = "c" + std::to_string(ex.label);
    for (const auto& tok : tokenize(ex.text))
      CHECK(std::string(tok).substr(0, want.size()) == want);
  }
}

TEST_CASE("token inventory covers every pool exactly once") {
  auto cfg = small_config();
  auto task = generate_synthetic_task(cfg);
  std::size_t expect = std::size_t(cfg.n_classes) * cfg.vocab_size + cfg.shared_vocab +
                       std::size_t(cfg.n_distractor_topics) * cfg.vocab_size;
  CHECK(task.tokens.size() == expect);
  std::set<std::string> uniq(task.tokens.begin(), task.tokens.end());
  CHECK(uniq.size() == task.tokens.size());
  CHECK(uniq.count("c0w0") == 1);
  CHECK(uniq.count("c2w29") == 1);
  CHECK(uniq.count("shw19") == 1);
  CHECK(uniq.count("d3w29") == 1);
}

TEST_CASE("extra in-domain sentences are independent of the other sections") {
  auto cfg = small_config();
  auto a = generate_indomain_sentences(cfg, 50);
  CHECK(a.size() == 50);
  CHECK(generate_indomain_sentences(cfg, 50) == a);
  // shrinking the bank or splits must not shift this stream
  cfg.bank_size = 10;
  cfg.n_train = 4;
  CHECK(generate_indomain_sentences(cfg, 50) == a);
  for (const auto& s : a)
    for (const auto& tok : tokenize(s)) CHECK(in_domain_token(std::string(tok)));
}

TEST_CASE("config validation rejects degenerate shapes") {
  auto cfg = small_config();
  cfg.n_classes = 1;
  CHECK_THROWS_AS(generate_synthetic_task(cfg), std::invalid_argument);
  cfg = small_config();
  cfg.len_max = cfg.len_min - 1;
  CHECK_THROWS_AS(generate_synthetic_task(cfg), std::invalid_argument);
  cfg = small_config();
  cfg.distractor_ratio = 1.5;
  CHECK_THROWS_AS(generate_synthetic_task(cfg), std::invalid_argument);
  cfg = small_config();
  cfg.n_distractor_topics = 0;
  CHECK_THROWS_AS(generate_synthetic_task(cfg), std::invalid_argument);
  cfg.distractor_ratio = 0.0;  // no topics needed when no distractors drawn
  CHECK_NOTHROW(generate_synthetic_task(cfg));
}

TEST_CASE("synthetic word vectors are unit norm and deterministic") {
  std::vector<std::string> toks = {"one", "two", "three", "four"};
  auto t1 = synth_word_vectors(toks, 16, 3);
  auto t2 = synth_word_vectors(toks, 16, 3);
  auto t3 = synth_word_vectors(toks, 16, 4);
  CHECK(t1.dim == 16);
  CHECK(t1.size() == 4);
  bool differs = false;
  for (const auto& tok : toks) {
    auto v = t1.find(tok);
    REQUIRE(v != nullptr);
    double norm = 0.0;
    for (std::uint32_t i = 0; i < 16; ++i) norm += double(v[i]) * double(v[i]);
    CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-5));
    auto w = t2.find(tok);
    for (std::uint32_t i = 0; i < 16; ++i) CHECK(v[i] == w[i]);
    auto u = t3.find(tok);
    for (std::uint32_t i = 0; i < 16; ++i) differs |= (v[i] != u[i]);
  }
  CHECK(differs);
  CHECK_THROWS_AS(synth_word_vectors(toks, 0, 1), std::invalid_argument);
}

TEST_CASE("odd dimensions fill the last coordinate") {
  std::vector<std::string> toks = {"solo"};
  auto t = synth_word_vectors(toks, 7, 11);
  auto v = t.find("solo");
  REQUIRE(v != nullptr);
  double norm = 0.0;
  for (std::uint32_t i = 0; i < 7; ++i) norm += double(v[i]) * double(v[i]);
  CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-5));
}
