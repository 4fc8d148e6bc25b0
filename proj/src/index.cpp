#include "retaug/index.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <thread>

namespace retaug {

MatrixViewRef MatrixViewRef::over(const EmbeddingMatrix& m) {
  MatrixViewRef v;
  v.dim = m.dim;
  v.count = m.count;
  v.dtype = m.dtype;
  v.f32 = m.f32.empty() ? nullptr : m.f32.data();
  v.i8 = m.i8.empty() ? nullptr : m.i8.data();
  v.scales = m.scales.empty() ? nullptr : m.scales.data();
  bool any_null = false;
  for (auto b : m.nulls)
    if (b) {
      any_null = true;
      break;
    }
  v.null_bytes = any_null ? m.nulls.data() : nullptr;
  return v;
}

MatrixViewRef MatrixViewRef::over(const MappedVectors& mv) {
  MatrixViewRef v;
  v.dim = mv.dim();
  v.count = mv.count();
  v.dtype = mv.dtype();
  if (mv.count()) {
    if (v.dtype == Dtype::f32) {
      v.f32 = mv.f32_row(0);
    } else {
      v.i8 = mv.i8_row(0);
      v.scales = mv.scales_base();
    }
  }
  v.null_bits = mv.has_nulls() ? mv.mask_base() : nullptr;
  return v;
}

namespace {

struct Cand {
  float score;
  std::uint64_t id;
};

inline bool better(const Cand& a, const Cand& b) {
  return a.score > b.score || (a.score == b.score && a.id < b.id);
}

// Min-on-top so the worst kept candidate is cheap to test against.
struct WorstOnTop {
  bool operator()(const Cand& a, const Cand& b) const { return better(a, b); }
};

using BoundedHeap = std::priority_queue<Cand, std::vector<Cand>, WorstOnTop>;

inline void heap_offer(BoundedHeap& h, std::size_t cap, Cand c) {
  if (h.size() < cap) {
    h.push(c);
  } else if (better(c, h.top())) {
    h.pop();
    h.push(c);
  }
}

inline std::int32_t dot_i8(const std::int8_t* a, const std::int8_t* b, std::uint32_t n) {
  std::int32_t s = 0;
  for (std::uint32_t i = 0; i < n; ++i) s += std::int32_t(a[i]) * std::int32_t(b[i]);
  return s;
}

struct QuantizedQuery {
  std::vector<std::int8_t> q;
  float scale = 0.0f;
};

QuantizedQuery quantize_query(const Vec& q) {
  QuantizedQuery out;
  float maxabs = 0.0f;
  for (float x : q) maxabs = std::max(maxabs, std::fabs(x));
  out.scale = maxabs / 127.0f;
  out.q.resize(q.size());
  if (out.scale == 0.0f) return out;
  for (std::size_t i = 0; i < q.size(); ++i)
    out.q[i] = std::int8_t(std::lround(q[i] / out.scale));
  return out;
}

}  // namespace

FlatIndex::FlatIndex(MatrixViewRef view, std::size_t shard_size, int rescore_factor,
                     unsigned threads)
    : view_(view), shard_size_(shard_size ? shard_size : 1), rescore_factor_(rescore_factor),
      threads_(threads) {
  if (rescore_factor_ < 1) throw std::invalid_argument("rescore_factor must be >= 1");
}

std::vector<Hit> FlatIndex::top_k(const Vec& query, std::size_t k) const {
  return top_k_multi({query}, k).front();
}

std::vector<std::vector<Hit>> FlatIndex::top_k_multi(const std::vector<Vec>& queries,
                                                     std::size_t k) const {
  if (queries.empty()) throw std::invalid_argument("top_k_multi: empty query set");
  if (k < 1) throw std::invalid_argument("top_k_multi: k must be >= 1");
  for (const auto& q : queries) {
    if (q.size() != view_.dim) throw std::invalid_argument("query dimension mismatch");
    if (l2_norm(std::span<const float>(q)) == 0.0)
      throw std::invalid_argument("zero query vector");
  }

  const std::size_t nq = queries.size();
  const bool quantized = view_.dtype == Dtype::i8;
  const std::size_t keep = quantized ? k * std::size_t(rescore_factor_) : k;

  std::vector<QuantizedQuery> qq;
  if (quantized) {
    qq.reserve(nq);
    for (const auto& q : queries) qq.push_back(quantize_query(q));
  }

  unsigned t = threads_ ? threads_ : std::thread::hardware_concurrency();
  if (t == 0) t = 1;
  const std::uint64_t n_shards = (view_.count + shard_size_ - 1) / shard_size_;
  t = unsigned(std::min<std::uint64_t>(t, std::max<std::uint64_t>(n_shards, 1)));

  // Each worker scans a contiguous range of shards and keeps per-query
  // bounded heaps; the merge below is order-independent because candidates
  // form a strict total order (score desc, id asc).
  std::vector<std::vector<std::vector<Cand>>> worker_out(t);
  auto scan_rows = [&](std::uint64_t begin, std::uint64_t end,
                       std::vector<BoundedHeap>& heaps) {
    const std::uint32_t dim = view_.dim;
    if (!quantized) {
      for (std::uint64_t r = begin; r < end; ++r) {
        if (view_.is_null(r)) continue;
        const float* row = view_.f32 + std::size_t(r) * dim;
        for (std::size_t qi = 0; qi < nq; ++qi) {
          float s = dot_f32(row, queries[qi].data(), dim);
          heap_offer(heaps[qi], keep, Cand{s, r});
        }
      }
    } else {
      for (std::uint64_t r = begin; r < end; ++r) {
        if (view_.is_null(r)) continue;
        const std::int8_t* row = view_.i8 + std::size_t(r) * dim;
        const float row_scale = view_.scales[r];
        for (std::size_t qi = 0; qi < nq; ++qi) {
          std::int32_t d = dot_i8(row, qq[qi].q.data(), dim);
          float s = float(d) * row_scale * qq[qi].scale;
          heap_offer(heaps[qi], keep, Cand{s, r});
        }
      }
    }
  };

  auto worker = [&](unsigned wi) {
    std::vector<BoundedHeap> heaps(nq);
    // contiguous shard blocks per worker
    for (std::uint64_t shard = wi; shard < n_shards; shard += t) {
      std::uint64_t begin = shard * shard_size_;
      std::uint64_t end = std::min<std::uint64_t>(view_.count, begin + shard_size_);
      scan_rows(begin, end, heaps);
    }
    auto& out = worker_out[wi];
    out.resize(nq);
    for (std::size_t qi = 0; qi < nq; ++qi) {
      out[qi].reserve(heaps[qi].size());
      while (!heaps[qi].empty()) {
        out[qi].push_back(heaps[qi].top());
        heaps[qi].pop();
      }
    }
  };

  if (t == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(t);
    for (unsigned wi = 0; wi < t; ++wi) pool.emplace_back(worker, wi);
    for (auto& th : pool) th.join();
  }

  std::vector<std::vector<Hit>> results(nq);
  for (std::size_t qi = 0; qi < nq; ++qi) {
    std::vector<Cand> cands;
    for (auto& w : worker_out)
      if (qi < w.size()) cands.insert(cands.end(), w[qi].begin(), w[qi].end());
    std::sort(cands.begin(), cands.end(), better);
    if (cands.size() > keep) cands.resize(keep);

    if (quantized) {
      // float32 rescoring of the surviving candidates
      const std::uint32_t dim = view_.dim;
      for (auto& c : cands) {
        const std::int8_t* row = view_.i8 + std::size_t(c.id) * dim;
        const float row_scale = view_.scales[c.id];
        float s = 0.0f;
        for (std::uint32_t j = 0; j < dim; ++j)
          s += float(row[j]) * row_scale * queries[qi][j];
        c.score = s;
      }
      std::sort(cands.begin(), cands.end(), better);
      if (cands.size() > k) cands.resize(k);
    }
    results[qi].reserve(cands.size());
    for (const auto& c : cands) results[qi].push_back(Hit{c.id, c.score});
  }
  return results;
}

EmbeddingMatrix quantize(const EmbeddingMatrix& m) {
  if (m.dtype != Dtype::f32) throw std::invalid_argument("quantize expects a float32 matrix");
  EmbeddingMatrix out = EmbeddingMatrix::zeros(m.dim, m.count, Dtype::i8);
  for (std::uint64_t r = 0; r < m.count; ++r) {
    if (m.is_null(r)) continue;  // null rows stay null
    auto row = m.row_f32(r);
    float maxabs = 0.0f;
    for (float x : row) maxabs = std::max(maxabs, std::fabs(x));
    if (maxabs == 0.0f) continue;  // zero row: keep flagged null
    float scale = maxabs / 127.0f;
    std::int8_t* q = out.i8.data() + std::size_t(r) * m.dim;
    for (std::uint32_t j = 0; j < m.dim; ++j) {
      long v = std::lround(row[j] / scale);
      v = std::clamp(v, -127l, 127l);
      q[j] = std::int8_t(v);
    }
    out.scales[r] = scale;
    out.nulls[r] = 0;
  }
  return out;
}

}  // namespace retaug
