#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "retaug/common.hpp"

namespace retaug {

enum class Dtype : std::uint8_t { f32 = 0, i8 = 1 };

struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Row-major embedding storage. Null rows (sentences that could not be
// embedded) are all-zero and flagged; int8 rows carry a per-row scale.
struct EmbeddingMatrix {
  std::uint32_t dim = 0;
  std::uint64_t count = 0;
  Dtype dtype = Dtype::f32;
  std::vector<float> f32;         // dim*count when dtype == f32
  std::vector<std::int8_t> i8;    // dim*count when dtype == i8
  std::vector<float> scales;      // count when dtype == i8
  std::vector<std::uint8_t> nulls;  // count entries, 0/1

  static EmbeddingMatrix zeros(std::uint32_t dim, std::uint64_t count, Dtype dt = Dtype::f32);

  bool is_null(std::uint64_t row) const { return nulls[row] != 0; }
  std::span<const float> row_f32(std::uint64_t row) const {
    return {f32.data() + row * dim, dim};
  }
  std::span<const std::int8_t> row_i8(std::uint64_t row) const {
    return {i8.data() + row * dim, dim};
  }
  void set_row(std::uint64_t row, std::span<const float> values);
  void set_null(std::uint64_t row);
  Vec dequant_row(std::uint64_t row) const;  // works for both dtypes

  std::uint64_t null_count() const;
  void validate() const;  // throws on broken invariants
};

// File layout (little-endian):
//   magic "SABK" | u32 version=1 | u32 dim | u64 count | u8 dtype | 15 reserved
//   f32: count*dim float32
//   i8:  count*dim int8, then count float32 scales
//   then ceil(count/8) bytes of null mask, LSB-first bit order.
void write_vectors(const EmbeddingMatrix& m, const std::string& path);
EmbeddingMatrix read_vectors(const std::string& path);

// Read-only memory-mapped view of a vector file; nothing is materialized.
class MappedVectors {
 public:
  static MappedVectors open(const std::string& path);
  MappedVectors() = default;
  MappedVectors(MappedVectors&&) noexcept;
  MappedVectors& operator=(MappedVectors&&) noexcept;
  MappedVectors(const MappedVectors&) = delete;
  MappedVectors& operator=(const MappedVectors&) = delete;
  ~MappedVectors();

  std::uint32_t dim() const { return dim_; }
  std::uint64_t count() const { return count_; }
  Dtype dtype() const { return dtype_; }
  const float* f32_row(std::uint64_t row) const {
    return reinterpret_cast<const float*>(data_) + row * dim_;
  }
  const std::int8_t* i8_row(std::uint64_t row) const {
    return reinterpret_cast<const std::int8_t*>(data_) + row * dim_;
  }
  float scale(std::uint64_t row) const {
    return reinterpret_cast<const float*>(scales_)[row];
  }
  bool is_null(std::uint64_t row) const {
    return mask_ && ((mask_[row >> 3] >> (row & 7)) & 1);
  }
  bool has_nulls() const { return has_nulls_; }
  const float* scales_base() const { return reinterpret_cast<const float*>(scales_); }
  const std::uint8_t* mask_base() const { return mask_; }
  void advise_sequential() const;

  EmbeddingMatrix materialize() const;

 private:
  void close();
  void* map_ = nullptr;
  std::size_t map_len_ = 0;
  const std::uint8_t* data_ = nullptr;
  const std::uint8_t* scales_ = nullptr;
  const std::uint8_t* mask_ = nullptr;
  bool has_nulls_ = false;
  std::uint32_t dim_ = 0;
  std::uint64_t count_ = 0;
  Dtype dtype_ = Dtype::f32;
};

}  // namespace retaug
