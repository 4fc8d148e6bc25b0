#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "retaug/text.hpp"
#include "retaug/vectors.hpp"

namespace retaug {

struct SentenceRecord {
  std::uint64_t id = 0;          // dense, 0-based
  std::string text;              // original surface form (first occurrence)
  std::uint64_t fingerprint = 0; // hash of normalized text
};

struct BankMeta {
  std::string source;
  std::uint32_t normalization_version = kNormalizationVersion;
};

struct BuildStats {
  std::uint64_t seen = 0;
  std::uint64_t kept = 0;
  std::uint64_t duplicates = 0;
};

// Deduplicated sentence store. Immutable after build; concurrent reads are
// safe. `vectors`, when present, has one row per record (null rows allowed).
struct SentenceBank {
  std::vector<SentenceRecord> records;
  BankMeta meta;
  std::optional<EmbeddingMatrix> vectors;

  std::uint64_t count() const { return records.size(); }
  std::uint32_t dim() const { return vectors ? vectors->dim : 0; }
  const std::string& text(std::uint64_t id) const { return records[id].text; }
  void validate() const;
};

// Keeps the first occurrence of each distinct normalized fingerprint, in
// stream order, with dense ids. The callback yields sentences until nullopt.
SentenceBank build_bank(const std::function<std::optional<std::string>()>& next_sentence,
                        BankMeta meta = {}, BuildStats* stats = nullptr);
SentenceBank build_bank(const std::vector<std::string>& sentences, BankMeta meta = {},
                        BuildStats* stats = nullptr);

struct RemoveOverlapResult {
  SentenceBank bank;
  std::vector<std::int64_t> old_to_new;  // -1 for dropped records
  std::uint64_t removed = 0;
};

// Drops every record whose normalized text matches a normalized test
// sentence, re-densifies ids and filters vector rows when present.
RemoveOverlapResult remove_overlap(const SentenceBank& bank,
                                   const std::vector<std::string>& test_sentences);

// On-disk layout under a path prefix:
//   <prefix>.txt       one sentence per line ('\\' and newlines escaped)
//   <prefix>.off       u64 count, then count+1 u64 line start offsets
//   <prefix>.meta.json source, normalization version, count
//   <prefix>.vec       embedding matrix (written separately, see vectors.hpp)
void save_bank(const SentenceBank& bank, const std::string& prefix);
SentenceBank load_bank(const std::string& prefix, bool load_vectors = true);

std::string escape_line(std::string_view text);
std::string unescape_line(std::string_view line);

// Random access to sentence text by id via the offset table, without
// loading the whole text file.
class BankTextView {
 public:
  static BankTextView open(const std::string& prefix);
  std::uint64_t count() const { return count_; }
  std::string text(std::uint64_t id) const;

 private:
  std::string txt_path_;
  std::vector<std::uint64_t> offsets_;
  std::uint64_t count_ = 0;
};

}  // namespace retaug
