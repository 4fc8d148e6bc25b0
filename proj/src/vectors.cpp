#include "retaug/vectors.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cstdio>
#include <cstring>
#include <stdexcept>
#include <utility>

namespace retaug {

namespace {

constexpr char kMagic[4] = {'S', 'A', 'B', 'K'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderSize = 36;

struct FileCloser {
  std::FILE* f;
  ~FileCloser() {
    if (f) std::fclose(f);
  }
};

void put_bytes(std::string& buf, const void* p, std::size_t n) {
  buf.append(reinterpret_cast<const char*>(p), n);
}

template <typename T>
void put_le(std::string& buf, T v) {
  put_bytes(buf, &v, sizeof(v));  // host is little-endian
}

std::size_t mask_bytes(std::uint64_t count) { return std::size_t((count + 7) / 8); }

}  // namespace

EmbeddingMatrix EmbeddingMatrix::zeros(std::uint32_t dim, std::uint64_t count, Dtype dt) {
  EmbeddingMatrix m;
  m.dim = dim;
  m.count = count;
  m.dtype = dt;
  if (dt == Dtype::f32) {
    m.f32.assign(std::size_t(dim) * count, 0.0f);
  } else {
    m.i8.assign(std::size_t(dim) * count, 0);
    m.scales.assign(count, 0.0f);
  }
  m.nulls.assign(count, 1);  // all null until rows are set
  return m;
}

void EmbeddingMatrix::set_row(std::uint64_t row, std::span<const float> values) {
  if (values.size() != dim) throw std::invalid_argument("set_row: width mismatch");
  if (dtype != Dtype::f32) throw std::invalid_argument("set_row: float32 matrices only");
  std::memcpy(f32.data() + row * dim, values.data(), dim * sizeof(float));
  nulls[row] = 0;
}

void EmbeddingMatrix::set_null(std::uint64_t row) {
  if (dtype == Dtype::f32) {
    std::memset(f32.data() + row * dim, 0, dim * sizeof(float));
  } else {
    std::memset(i8.data() + row * dim, 0, dim);
    scales[row] = 0.0f;
  }
  nulls[row] = 1;
}

Vec EmbeddingMatrix::dequant_row(std::uint64_t row) const {
  Vec v(dim);
  if (dtype == Dtype::f32) {
    std::memcpy(v.data(), f32.data() + row * dim, dim * sizeof(float));
  } else {
    const std::int8_t* q = i8.data() + row * dim;
    float s = scales[row];
    for (std::uint32_t j = 0; j < dim; ++j) v[j] = float(q[j]) * s;
  }
  return v;
}

std::uint64_t EmbeddingMatrix::null_count() const {
  std::uint64_t n = 0;
  for (auto b : nulls) n += b;
  return n;
}

void EmbeddingMatrix::validate() const {
  if (nulls.size() != count) throw std::logic_error("null mask size mismatch");
  if (dtype == Dtype::f32) {
    if (f32.size() != std::size_t(dim) * count) throw std::logic_error("data length != dim*count");
  } else {
    if (i8.size() != std::size_t(dim) * count) throw std::logic_error("data length != dim*count");
    if (scales.size() != count) throw std::logic_error("scales size mismatch");
  }
  for (std::uint64_t r = 0; r < count; ++r) {
    if (is_null(r)) {
      Vec v = dequant_row(r);
      for (float x : v)
        if (x != 0.0f) throw std::logic_error("null row is not all-zero");
    }
  }
}

void write_vectors(const EmbeddingMatrix& m, const std::string& path) {
  std::string header;
  header.reserve(kHeaderSize);
  put_bytes(header, kMagic, 4);
  put_le(header, kVersion);
  put_le(header, m.dim);
  put_le(header, m.count);
  put_le(header, std::uint8_t(m.dtype));
  header.append(15, '\0');

  std::string tmp = path + ".tmp";
  std::FILE* f = std::fopen(tmp.c_str(), "wb");
  if (!f) throw std::runtime_error("cannot open for write: " + tmp);
  FileCloser closer{f};

  auto write_all = [&](const void* p, std::size_t n) {
    if (n && std::fwrite(p, 1, n, f) != n) {
      std::fclose(f);
      closer.f = nullptr;
      std::remove(tmp.c_str());
      throw std::runtime_error("short write: " + tmp);
    }
  };

  write_all(header.data(), header.size());
  if (m.dtype == Dtype::f32) {
    write_all(m.f32.data(), m.f32.size() * sizeof(float));
  } else {
    write_all(m.i8.data(), m.i8.size());
    write_all(m.scales.data(), m.scales.size() * sizeof(float));
  }
  std::vector<std::uint8_t> mask(mask_bytes(m.count), 0);
  for (std::uint64_t r = 0; r < m.count; ++r)
    if (m.nulls[r]) mask[r >> 3] |= std::uint8_t(1u << (r & 7));
  write_all(mask.data(), mask.size());

  std::fclose(f);
  closer.f = nullptr;
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw std::runtime_error("rename failed: " + path);
  }
}

EmbeddingMatrix read_vectors(const std::string& path) {
  MappedVectors mv = MappedVectors::open(path);
  return mv.materialize();
}

MappedVectors MappedVectors::open(const std::string& path) {
  int fd = ::open(path.c_str(), O_RDONLY);
  if (fd < 0) throw FormatError("cannot open vector file: " + path);
  struct stat st{};
  if (fstat(fd, &st) != 0) {
    ::close(fd);
    throw FormatError("stat failed: " + path);
  }
  std::size_t len = std::size_t(st.st_size);
  if (len < kHeaderSize) {
    ::close(fd);
    throw FormatError("vector file truncated (no header): " + path);
  }
  void* map = ::mmap(nullptr, len, PROT_READ, MAP_PRIVATE, fd, 0);
  ::close(fd);
  if (map == MAP_FAILED) throw FormatError("mmap failed: " + path);

  MappedVectors mv;
  mv.map_ = map;
  mv.map_len_ = len;
  const auto* p = static_cast<const std::uint8_t*>(map);
  if (std::memcmp(p, kMagic, 4) != 0) {
    throw FormatError("bad magic in vector file: " + path);
  }
  std::uint32_t version = 0;
  std::memcpy(&version, p + 4, 4);
  if (version != kVersion) throw FormatError("unsupported vector file version");
  std::memcpy(&mv.dim_, p + 8, 4);
  std::memcpy(&mv.count_, p + 12, 8);
  std::uint8_t dt = p[20];
  if (dt > 1) throw FormatError("unknown dtype in vector file");
  mv.dtype_ = Dtype(dt);
  if (mv.dim_ == 0 && mv.count_ > 0) throw FormatError("zero dim with nonzero count");

  std::size_t cell = mv.dtype_ == Dtype::f32 ? 4 : 1;
  std::size_t data_bytes = std::size_t(mv.dim_) * mv.count_ * cell;
  std::size_t scale_bytes = mv.dtype_ == Dtype::i8 ? mv.count_ * 4 : 0;
  std::size_t need = kHeaderSize + data_bytes + scale_bytes + mask_bytes(mv.count_);
  if (len < need) throw FormatError("vector file truncated: " + path);

  mv.data_ = p + kHeaderSize;
  mv.scales_ = p + kHeaderSize + data_bytes;
  mv.mask_ = p + kHeaderSize + data_bytes + scale_bytes;
  for (std::size_t i = 0; i < mask_bytes(mv.count_); ++i) {
    if (mv.mask_[i]) {
      mv.has_nulls_ = true;
      break;
    }
  }
  if (!mv.has_nulls_) mv.mask_ = nullptr;  // skip per-row checks on the scan
  return mv;
}

MappedVectors::MappedVectors(MappedVectors&& o) noexcept { *this = std::move(o); }

MappedVectors& MappedVectors::operator=(MappedVectors&& o) noexcept {
  if (this != &o) {
    close();
    map_ = std::exchange(o.map_, nullptr);
    map_len_ = std::exchange(o.map_len_, 0);
    data_ = o.data_;
    scales_ = o.scales_;
    mask_ = o.mask_;
    has_nulls_ = o.has_nulls_;
    dim_ = o.dim_;
    count_ = o.count_;
    dtype_ = o.dtype_;
  }
  return *this;
}

MappedVectors::~MappedVectors() { close(); }

void MappedVectors::close() {
  if (map_) {
    ::munmap(map_, map_len_);
    map_ = nullptr;
  }
}

void MappedVectors::advise_sequential() const {
  if (map_) ::madvise(map_, map_len_, MADV_SEQUENTIAL);
}

EmbeddingMatrix MappedVectors::materialize() const {
  EmbeddingMatrix m;
  m.dim = dim_;
  m.count = count_;
  m.dtype = dtype_;
  std::size_t cells = std::size_t(dim_) * count_;
  if (dtype_ == Dtype::f32) {
    m.f32.resize(cells);
    std::memcpy(m.f32.data(), data_, cells * sizeof(float));
  } else {
    m.i8.resize(cells);
    std::memcpy(m.i8.data(), data_, cells);
    m.scales.resize(count_);
    std::memcpy(m.scales.data(), scales_, count_ * sizeof(float));
  }
  m.nulls.assign(count_, 0);
  if (has_nulls_) {
    for (std::uint64_t r = 0; r < count_; ++r)
      m.nulls[r] = std::uint8_t((mask_[r >> 3] >> (r & 7)) & 1);
  }
  return m;
}

}  // namespace retaug
