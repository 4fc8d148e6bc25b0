#include "retaug/bank.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

namespace retaug {

void SentenceBank::validate() const {
  std::unordered_set<std::uint64_t> fps;
  fps.reserve(records.size());
  for (std::uint64_t i = 0; i < records.size(); ++i) {
    if (records[i].id != i) throw std::logic_error("ids not dense");
    if (!fps.insert(records[i].fingerprint).second)
      throw std::logic_error("duplicate fingerprint in bank");
  }
  if (vectors) {
    if (vectors->count != records.size()) throw std::logic_error("vectors.count != records.count");
    for (std::uint64_t r = 0; r < vectors->count; ++r) {
      if (vectors->is_null(r)) continue;
      Vec v = vectors->dequant_row(r);
      double n = l2_norm(v);
      if (vectors->dtype == Dtype::f32 && std::abs(n - 1.0) > 1e-5)
        throw std::logic_error("non-unit embedding row");
    }
  }
}

SentenceBank build_bank(const std::function<std::optional<std::string>()>& next_sentence,
                        BankMeta meta, BuildStats* stats) {
  SentenceBank bank;
  bank.meta = meta;
  std::unordered_set<std::uint64_t> seen_fps;
  BuildStats local{};
  while (auto s = next_sentence()) {
    ++local.seen;
    std::uint64_t fp = fingerprint64(normalize(*s));
    if (!seen_fps.insert(fp).second) {
      ++local.duplicates;
      continue;
    }
    SentenceRecord rec;
    rec.id = bank.records.size();
    rec.text = std::move(*s);
    rec.fingerprint = fp;
    bank.records.push_back(std::move(rec));
    ++local.kept;
  }
  if (stats) *stats = local;
  return bank;
}

SentenceBank build_bank(const std::vector<std::string>& sentences, BankMeta meta,
                        BuildStats* stats) {
  std::size_t i = 0;
  return build_bank(
      [&]() -> std::optional<std::string> {
        if (i >= sentences.size()) return std::nullopt;
        return sentences[i++];
      },
      meta, stats);
}

RemoveOverlapResult remove_overlap(const SentenceBank& bank,
                                   const std::vector<std::string>& test_sentences) {
  std::unordered_set<std::uint64_t> test_fps;
  test_fps.reserve(test_sentences.size());
  for (const auto& s : test_sentences) test_fps.insert(fingerprint64(normalize(s)));

  RemoveOverlapResult res;
  res.bank.meta = bank.meta;
  res.old_to_new.assign(bank.records.size(), -1);
  for (const auto& rec : bank.records) {
    if (test_fps.count(rec.fingerprint)) {
      ++res.removed;
      continue;
    }
    SentenceRecord kept = rec;
    kept.id = res.bank.records.size();
    res.old_to_new[rec.id] = std::int64_t(kept.id);
    res.bank.records.push_back(std::move(kept));
  }
  if (bank.vectors) {
    const EmbeddingMatrix& src = *bank.vectors;
    EmbeddingMatrix dst = EmbeddingMatrix::zeros(src.dim, res.bank.records.size(), src.dtype);
    for (std::uint64_t old_id = 0; old_id < bank.records.size(); ++old_id) {
      std::int64_t nid = res.old_to_new[old_id];
      if (nid < 0) continue;
      if (src.is_null(old_id)) {
        dst.set_null(std::uint64_t(nid));
        continue;
      }
      if (src.dtype == Dtype::f32) {
        dst.set_row(std::uint64_t(nid), src.row_f32(old_id));
      } else {
        std::memcpy(dst.i8.data() + std::uint64_t(nid) * dst.dim,
                    src.i8.data() + old_id * src.dim, src.dim);
        dst.scales[std::uint64_t(nid)] = src.scales[old_id];
        dst.nulls[std::uint64_t(nid)] = 0;
      }
    }
    res.bank.vectors = std::move(dst);
  }
  return res;
}

std::string escape_line(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string unescape_line(std::string_view line) {
  std::string out;
  out.reserve(line.size());
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (c == '\\' && i + 1 < line.size()) {
      char n = line[++i];
      if (n == 'n') out.push_back('\n');
      else if (n == 'r') out.push_back('\r');
      else out.push_back(n);
    } else {
      out.push_back(c);
    }
  }
  return out;
}

namespace {

void remove_partials(const std::string& prefix) {
  for (const char* ext : {".txt.tmp", ".off.tmp", ".meta.json.tmp", ".vec.tmp"})
    std::remove((prefix + ext).c_str());
}

void commit(const std::string& prefix, const char* ext) {
  std::string tmp = prefix + ext + ".tmp";
  std::string dst = prefix + ext;
  if (std::rename(tmp.c_str(), dst.c_str()) != 0)
    throw std::runtime_error("rename failed: " + dst);
}

}  // namespace

void save_bank(const SentenceBank& bank, const std::string& prefix) {
  try {
    std::ofstream txt(prefix + ".txt.tmp", std::ios::binary);
    std::ofstream off(prefix + ".off.tmp", std::ios::binary);
    if (!txt || !off) throw std::runtime_error("cannot open bank files for write: " + prefix);

    std::vector<std::uint64_t> offsets;
    offsets.reserve(bank.records.size() + 1);
    std::uint64_t pos = 0;
    for (const auto& rec : bank.records) {
      offsets.push_back(pos);
      std::string line = escape_line(rec.text);
      txt.write(line.data(), std::streamsize(line.size()));
      txt.put('\n');
      pos += line.size() + 1;
    }
    offsets.push_back(pos);
    if (!txt) throw std::runtime_error("write failed: " + prefix + ".txt");

    std::uint64_t n = bank.records.size();
    off.write(reinterpret_cast<const char*>(&n), sizeof(n));
    off.write(reinterpret_cast<const char*>(offsets.data()),
              std::streamsize(offsets.size() * sizeof(std::uint64_t)));
    if (!off) throw std::runtime_error("write failed: " + prefix + ".off");
    txt.close();
    off.close();

    nlohmann::json meta = {
        {"source", bank.meta.source},
        {"normalization_version", bank.meta.normalization_version},
        {"count", bank.records.size()},
    };
    std::ofstream mj(prefix + ".meta.json.tmp", std::ios::binary);
    mj << meta.dump(2) << "\n";
    if (!mj) throw std::runtime_error("write failed: " + prefix + ".meta.json");
    mj.close();

    if (bank.vectors) write_vectors(*bank.vectors, prefix + ".vec.tmp");

    commit(prefix, ".txt");
    commit(prefix, ".off");
    commit(prefix, ".meta.json");
    if (bank.vectors) commit(prefix, ".vec");
  } catch (...) {
    remove_partials(prefix);
    throw;
  }
}

SentenceBank load_bank(const std::string& prefix, bool load_vectors) {
  SentenceBank bank;
  {
    std::ifstream mj(prefix + ".meta.json");
    if (!mj) throw std::runtime_error("missing bank meta: " + prefix + ".meta.json");
    nlohmann::json meta = nlohmann::json::parse(mj);
    bank.meta.source = meta.value("source", "");
    bank.meta.normalization_version = meta.value("normalization_version", kNormalizationVersion);
  }
  std::ifstream txt(prefix + ".txt", std::ios::binary);
  if (!txt) throw std::runtime_error("missing bank text: " + prefix + ".txt");
  std::string line;
  while (std::getline(txt, line)) {
    SentenceRecord rec;
    rec.id = bank.records.size();
    rec.text = unescape_line(line);
    rec.fingerprint = fingerprint64(normalize(rec.text));
    bank.records.push_back(std::move(rec));
  }
  if (load_vectors) {
    std::ifstream probe(prefix + ".vec", std::ios::binary);
    if (probe.good()) {
      probe.close();
      bank.vectors = read_vectors(prefix + ".vec");
    }
  }
  return bank;
}

BankTextView BankTextView::open(const std::string& prefix) {
  BankTextView view;
  view.txt_path_ = prefix + ".txt";
  std::ifstream off(prefix + ".off", std::ios::binary);
  if (!off) throw std::runtime_error("missing bank offsets: " + prefix + ".off");
  std::uint64_t n = 0;
  off.read(reinterpret_cast<char*>(&n), sizeof(n));
  view.offsets_.resize(n + 1);
  off.read(reinterpret_cast<char*>(view.offsets_.data()),
           std::streamsize((n + 1) * sizeof(std::uint64_t)));
  if (!off) throw std::runtime_error("truncated bank offsets: " + prefix + ".off");
  view.count_ = n;
  return view;
}

std::string BankTextView::text(std::uint64_t id) const {
  if (id >= count_) throw std::out_of_range("sentence id out of range");
  std::uint64_t begin = offsets_[id];
  std::uint64_t end = offsets_[id + 1];  // includes the trailing '\n'
  std::ifstream txt(txt_path_, std::ios::binary);
  txt.seekg(std::streamoff(begin));
  std::string buf(end - begin - 1, '\0');
  txt.read(buf.data(), std::streamsize(buf.size()));
  if (!txt) throw std::runtime_error("bank text read failed");
  return unescape_line(buf);
}

}  // namespace retaug
