#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <random>

#include "retaug/bank.hpp"

using namespace retaug;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("retaug_bank_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string prefix(const char* name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("build_bank dedups on normalized text, keeps first surface form") {
  BuildStats stats;
  auto bank = build_bank({"Hello World", "hello   world", "Other text", "HELLO WORLD"},
                         {"unit", kNormalizationVersion}, &stats);
  CHECK(stats.seen == 4);
  CHECK(stats.kept == 2);
  CHECK(stats.duplicates == 2);
  REQUIRE(bank.count() == 2);
  CHECK(bank.records[0].id == 0);
  CHECK(bank.records[0].text == "Hello World");
  CHECK(bank.records[1].text == "Other text");
  CHECK(bank.records[0].fingerprint == fingerprint64(normalize("Hello World")));
  bank.validate();
}

TEST_CASE("build_bank callback form stops at nullopt") {
  int i = 0;
  auto bank = build_bank([&]() -> std::optional<std::string> {
    if (i >= 3) return std::nullopt;
    return "sentence number " + std::to_string(i++);
  });
  CHECK(bank.count() == 3);
}

TEST_CASE("remove_overlap drops normalized matches and redensifies") {
  auto bank = build_bank({"keep one", "Drop Me", "keep two", "drop me too"});
  auto result = remove_overlap(bank, {"DROP ME", "drop  me  too"});
  CHECK(result.removed == 2);
  REQUIRE(result.bank.count() == 2);
  CHECK(result.bank.records[0].text == "keep one");
  CHECK(result.bank.records[1].text == "keep two");
  CHECK(result.bank.records[1].id == 1);
  REQUIRE(result.old_to_new.size() == 4);
  CHECK(result.old_to_new[0] == 0);
  CHECK(result.old_to_new[1] == -1);
  CHECK(result.old_to_new[2] == 1);
  CHECK(result.old_to_new[3] == -1);
}

TEST_CASE("remove_overlap filters vector rows in step") {
  auto bank = build_bank({"alpha one two", "beta one two", "gamma one two"});
  bank.vectors = EmbeddingMatrix::zeros(2, 3);
  bank.vectors->set_row(0, std::vector<float>{1, 0});
  bank.vectors->set_row(1, std::vector<float>{2, 0});
  bank.vectors->set_row(2, std::vector<float>{3, 0});
  auto result = remove_overlap(bank, {"beta one two"});
  REQUIRE(result.bank.vectors.has_value());
  CHECK(result.bank.vectors->count == 2);
  CHECK(result.bank.vectors->row_f32(0)[0] == 1.0f);
  CHECK(result.bank.vectors->row_f32(1)[0] == 3.0f);
}

TEST_CASE("save and load round trip with escaped newlines") {
  TempDir tmp;
  auto bank = build_bank({"plain text", "with\nnewline", "with\\backslash"});
  save_bank(bank, tmp.prefix("bank"));
  auto back = load_bank(tmp.prefix("bank"));
  REQUIRE(back.count() == 3);
  CHECK(back.records[0].text == "plain text");
  CHECK(back.records[1].text == "with\nnewline");
  CHECK(back.records[2].text == "with\\backslash");
  CHECK(back.meta.normalization_version == kNormalizationVersion);
  back.validate();
}

TEST_CASE("save and load carry vectors when present") {
  TempDir tmp;
  auto bank = build_bank({"first sentence here", "second sentence here"});
  bank.vectors = EmbeddingMatrix::zeros(3, 2);
  bank.vectors->set_row(0, std::vector<float>{1, 2, 3});
  bank.vectors->set_row(1, std::vector<float>{4, 5, 6});
  save_bank(bank, tmp.prefix("bv"));

  auto with = load_bank(tmp.prefix("bv"), true);
  REQUIRE(with.vectors.has_value());
  CHECK(with.vectors->row_f32(1)[2] == 6.0f);

  auto without = load_bank(tmp.prefix("bv"), false);
  CHECK_FALSE(without.vectors.has_value());
}

TEST_CASE("escape round trips control characters") {
  for (const char* s : {"plain", "a\nb", "a\\b", "a\\nb", "\n", "\\", ""}) {
    CHECK(unescape_line(escape_line(s)) == s);
  }
  CHECK(escape_line("a\nb").find('\n') == std::string::npos);
}

TEST_CASE("BankTextView reads by id without loading everything") {
  TempDir tmp;
  std::vector<std::string> sentences;
  for (int i = 0; i < 50; ++i) sentences.push_back("sentence " + std::to_string(i) + " body");
  auto bank = build_bank(sentences);
  save_bank(bank, tmp.prefix("view"));

  auto view = BankTextView::open(tmp.prefix("view"));
  CHECK(view.count() == 50);
  CHECK(view.text(0) == "sentence 0 body");
  CHECK(view.text(49) == "sentence 49 body");
  CHECK(view.text(17) == "sentence 17 body");
}

TEST_CASE("load_bank rejects missing files") {
  CHECK_THROWS(load_bank("/nonexistent/prefix"));
}
