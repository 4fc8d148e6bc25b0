#include "retaug/queries.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>
#include <unordered_map>

namespace retaug {

QueryMode parse_query_mode(std::string_view name) {
  if (name == "all" || name == "all-average") return QueryMode::all_average;
  if (name == "label" || name == "label-average") return QueryMode::label_average;
  if (name == "sent" || name == "per-sentence") return QueryMode::per_sentence;
  throw std::invalid_argument("unknown query mode: " + std::string(name));
}

const char* query_mode_name(QueryMode m) {
  switch (m) {
    case QueryMode::all_average: return "all-average";
    case QueryMode::label_average: return "label-average";
    case QueryMode::per_sentence: return "per-sentence";
  }
  return "?";
}

namespace {

Vec normalized_mean(const std::vector<std::vector<double>>& sums, std::size_t idx,
                    std::size_t n) {
  const auto& s = sums[idx];
  Vec v(s.size());
  for (std::size_t j = 0; j < s.size(); ++j) v[j] = float(s[j] / double(n));
  if (!l2_normalize(v)) throw std::runtime_error("query mean cancelled to zero");
  return v;
}

}  // namespace

QuerySet build_queries(const LabeledDataset& data, QueryMode mode, const Encoder& encoder) {
  QuerySet out;
  out.mode = mode;
  const std::size_t n_labels = std::size_t(data.num_classes());
  const std::uint32_t dim = encoder.dim();

  // per-label running sums in double; index n_labels holds the global sum
  std::vector<std::vector<double>> sums(n_labels + 1, std::vector<double>(dim, 0.0));
  std::vector<std::size_t> counts(n_labels + 1, 0);

  for (const auto& e : data.examples) {
    auto emb = encoder.encode(e.text);
    if (!emb) {
      ++out.skipped;
      continue;
    }
    if (mode == QueryMode::per_sentence) {
      out.queries.push_back(Query{std::move(*emb), e.label});
      continue;
    }
    auto& dst = mode == QueryMode::all_average ? sums[n_labels] : sums[std::size_t(e.label)];
    for (std::uint32_t j = 0; j < dim; ++j) dst[j] += (*emb)[j];
    ++counts[mode == QueryMode::all_average ? n_labels : std::size_t(e.label)];
  }
  if (out.skipped)
    std::fputs(("build_queries: skipped " + std::to_string(out.skipped) +
                " examples that failed to embed\n")
                   .c_str(),
               stderr);

  switch (mode) {
    case QueryMode::all_average:
      if (counts[n_labels] == 0)
        throw std::runtime_error("build_queries: no training example embeds");
      out.queries.push_back(Query{normalized_mean(sums, n_labels, counts[n_labels]), -1});
      break;
    case QueryMode::label_average:
      for (std::size_t c = 0; c < n_labels; ++c) {
        if (counts[c] == 0)
          throw std::runtime_error("build_queries: no embeddable example for label '" +
                                   data.label_names[c] + "'");
        out.queries.push_back(Query{normalized_mean(sums, c, counts[c]), int(c)});
      }
      break;
    case QueryMode::per_sentence:
      if (out.queries.empty())
        throw std::runtime_error("build_queries: no training example embeds");
      break;
  }
  return out;
}

std::vector<PoolEntry> retrieve_pool(const QuerySet& qs, const FlatIndex& index,
                                     std::size_t per_query_k) {
  if (qs.queries.empty()) throw std::invalid_argument("retrieve_pool: empty query set");
  if (per_query_k < 1) throw std::invalid_argument("retrieve_pool: per_query_k must be >= 1");

  std::vector<Vec> vecs;
  vecs.reserve(qs.queries.size());
  for (const auto& q : qs.queries) vecs.push_back(q.vec);
  auto hits = index.top_k_multi(vecs, per_query_k);

  std::unordered_map<std::uint64_t, PoolEntry> best;
  for (std::size_t qi = 0; qi < hits.size(); ++qi) {
    const int label = qs.queries[qi].label;
    for (const auto& h : hits[qi]) {
      auto [it, inserted] = best.try_emplace(h.id, PoolEntry{h.id, h.score, label});
      if (!inserted && h.score > it->second.score) {
        it->second.score = h.score;
        it->second.source_label = label;
      }
    }
  }

  std::vector<PoolEntry> pool;
  pool.reserve(best.size());
  for (const auto& [_, e] : best) pool.push_back(e);
  std::sort(pool.begin(), pool.end(), [](const PoolEntry& a, const PoolEntry& b) {
    return a.score > b.score || (a.score == b.score && a.id < b.id);
  });
  return pool;
}

}  // namespace retaug
