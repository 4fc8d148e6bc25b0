#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "retaug/common.hpp"
#include "retaug/dataset.hpp"
#include "retaug/embedder.hpp"
#include "retaug/index.hpp"

namespace retaug {

enum class QueryMode { all_average, label_average, per_sentence };

QueryMode parse_query_mode(std::string_view name);  // "all" | "label" | "sent"
const char* query_mode_name(QueryMode m);

struct Query {
  Vec vec;         // unit norm
  int label = -1;  // -1 when the mode carries no label
};

struct QuerySet {
  QueryMode mode = QueryMode::label_average;
  std::vector<Query> queries;
  std::size_t skipped = 0;  // training sentences that failed to embed
};

// all-average: one query, the normalized mean of all non-null training
// embeddings. label-average: one normalized per-label mean, tagged with the
// label. per-sentence: every non-null embedding, tagged, in dataset order.
// Throws when a label has no embeddable example (label-average) or nothing
// embeds at all.
QuerySet build_queries(const LabeledDataset& data, QueryMode mode, const Encoder& encoder);

struct PoolEntry {
  std::uint64_t id = 0;
  float score = 0.0f;
  int source_label = -1;  // label of the best-scoring query, advisory only
};

// Union of per-query top-k hits. Duplicates keep the max score (and that
// query's label); output sorted by score descending, id ascending.
std::vector<PoolEntry> retrieve_pool(const QuerySet& qs, const FlatIndex& index,
                                     std::size_t per_query_k);

}  // namespace retaug
