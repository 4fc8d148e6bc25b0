#pragma once

#include <cstdint>
#include <vector>

#include "retaug/common.hpp"
#include "retaug/vectors.hpp"

namespace retaug {

struct Hit {
  std::uint64_t id = 0;
  float score = 0.0f;  // cosine; both sides unit norm, so dot == cosine
};

// Lightweight non-owning view the scanner works over; constructed from an
// in-memory matrix or a memory-mapped file.
struct MatrixViewRef {
  std::uint32_t dim = 0;
  std::uint64_t count = 0;
  Dtype dtype = Dtype::f32;
  const float* f32 = nullptr;
  const std::int8_t* i8 = nullptr;
  const float* scales = nullptr;
  const std::uint8_t* null_bytes = nullptr;  // byte per row; nullptr: none null
  const std::uint8_t* null_bits = nullptr;   // bit-packed alternative

  bool is_null(std::uint64_t row) const {
    if (null_bytes) return null_bytes[row] != 0;
    if (null_bits) return ((null_bits[row >> 3] >> (row & 7)) & 1) != 0;
    return false;
  }
  static MatrixViewRef over(const EmbeddingMatrix& m);
  static MatrixViewRef over(const MappedVectors& mv);
};

// Exact top-k cosine retrieval by sharded brute-force scan. In int8 mode the
// top rescore_factor*k candidates by quantized score are re-scored in float32
// before selection. Results are identical for any shard size or thread count.
class FlatIndex {
 public:
  explicit FlatIndex(MatrixViewRef view, std::size_t shard_size = 1u << 16,
                     int rescore_factor = 10, unsigned threads = 0);

  // Highest-dot rows, score descending, ties by ascending id. Fewer than k
  // only when the bank holds fewer non-null rows. Throws on a zero query.
  std::vector<Hit> top_k(const Vec& query, std::size_t k) const;

  // One pass over the matrix for all queries; per query equals top_k.
  std::vector<std::vector<Hit>> top_k_multi(const std::vector<Vec>& queries, std::size_t k) const;

  std::uint64_t count() const { return view_.count; }
  std::uint32_t dim() const { return view_.dim; }

 private:
  MatrixViewRef view_;
  std::size_t shard_size_;
  int rescore_factor_;
  unsigned threads_;
};

// Per-row symmetric int8 quantization: scale = max|component| / 127,
// q = round(component / scale). Null rows stay null with scale 0.
EmbeddingMatrix quantize(const EmbeddingMatrix& m);

}  // namespace retaug
