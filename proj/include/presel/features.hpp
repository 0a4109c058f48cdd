#pragma once

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "presel/error.hpp"
#include "presel/manifest.hpp"

namespace presel {

static_assert(std::endian::native == std::endian::little, "feature files are little-endian; big-endian hosts unsupported");

// Binary layout: magic[8] "PRESELFM", version u32, n u64, d u32, then n*d f32.
inline constexpr std::array<char, 8> kFeatureMagic{'P', 'R', 'E', 'S', 'E', 'L', 'F', 'M'};
inline constexpr std::uint32_t kFeatureVersion = 1;
inline constexpr std::size_t kFeatureHeaderBytes = 8 + 4 + 8 + 4;

// Read-only row-major view over n x d floats.
struct MatrixView {
  const float* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;

  [[nodiscard]] std::span<const float> row(std::size_t i) const { return {data + i * cols, cols}; }
};

// Owning dense row-major float matrix.
struct DenseMatrix {
  std::vector<float> values;
  std::size_t rows = 0;
  std::size_t cols = 0;

  DenseMatrix() = default;
  DenseMatrix(std::size_t n, std::size_t d) : values(n * d, 0.0f), rows(n), cols(d) {}
  DenseMatrix(std::size_t n, std::size_t d, std::vector<float> v) : values(std::move(v)), rows(n), cols(d) {
    if (values.size() != n * d) throw Error(ErrorKind::RowCountMismatch, "dense matrix payload size mismatch");
  }

  [[nodiscard]] MatrixView view() const { return {values.data(), rows, cols}; }
  [[nodiscard]] std::span<float> row(std::size_t i) { return {values.data() + i * cols, cols}; }
  [[nodiscard]] std::span<const float> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
};

namespace detail {

class MappedFile {
 public:
  explicit MappedFile(const std::string& path) {
    fd_ = ::open(path.c_str(), O_RDONLY);
    if (fd_ < 0) throw Error(ErrorKind::IoError, "cannot open " + path);
    struct stat st {};
    if (::fstat(fd_, &st) != 0) {
      ::close(fd_);
      throw Error(ErrorKind::IoError, "cannot stat " + path);
    }
    size_ = static_cast<std::size_t>(st.st_size);
    if (size_ > 0) {
      void* p = ::mmap(nullptr, size_, PROT_READ, MAP_PRIVATE, fd_, 0);
      if (p == MAP_FAILED) {
        ::close(fd_);
        throw Error(ErrorKind::IoError, "cannot map " + path);
      }
      data_ = static_cast<const unsigned char*>(p);
    }
  }
  MappedFile(const MappedFile&) = delete;
  MappedFile& operator=(const MappedFile&) = delete;
  ~MappedFile() {
    if (data_ != nullptr) ::munmap(const_cast<unsigned char*>(data_), size_);
    if (fd_ >= 0) ::close(fd_);
  }

  [[nodiscard]] const unsigned char* data() const noexcept { return data_; }
  [[nodiscard]] std::size_t size() const noexcept { return size_; }

 private:
  int fd_ = -1;
  const unsigned char* data_ = nullptr;
  std::size_t size_ = 0;
};

template <typename T>
T read_le(const unsigned char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

}  // namespace detail

// Feature store aligned with a manifest's image-bearing records. Backed either
// by a memory-mapped file or by an owned buffer; immutable once constructed.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;

  static FeatureMatrix from_dense(DenseMatrix dense) {
    FeatureMatrix f;
    auto owned = std::make_shared<DenseMatrix>(std::move(dense));
    f.data_ = owned->values.data();
    f.rows_ = owned->rows;
    f.cols_ = owned->cols;
    f.storage_ = std::move(owned);
    f.validate();
    return f;
  }

  static FeatureMatrix map_file(const std::string& path) {
    auto file = std::make_shared<detail::MappedFile>(path);
    const unsigned char* p = file->data();
    if (file->size() < kFeatureHeaderBytes || std::memcmp(p, kFeatureMagic.data(), kFeatureMagic.size()) != 0)
      throw Error(ErrorKind::MalformedFeatureFile, path + " is not a feature file (bad magic or short header)");
    auto version = detail::read_le<std::uint32_t>(p + 8);
    if (version != kFeatureVersion)
      throw Error(ErrorKind::MalformedFeatureFile, "unsupported feature file version " + std::to_string(version));
    auto n = detail::read_le<std::uint64_t>(p + 12);
    auto d = detail::read_le<std::uint32_t>(p + 20);
    if (d == 0) throw Error(ErrorKind::MalformedFeatureFile, "feature dimension is zero");
    std::size_t payload_rows = (file->size() - kFeatureHeaderBytes) / (std::size_t{d} * sizeof(float));
    if (payload_rows != n || (file->size() - kFeatureHeaderBytes) % (std::size_t{d} * sizeof(float)) != 0)
      throw Error(ErrorKind::RowCountMismatch, "header declares " + std::to_string(n) + " rows of dimension " +
                                                   std::to_string(d) + " but payload holds " +
                                                   std::to_string(file->size() - kFeatureHeaderBytes) + " bytes");
    FeatureMatrix f;
    f.data_ = reinterpret_cast<const float*>(p + kFeatureHeaderBytes);
    f.rows_ = static_cast<std::size_t>(n);
    f.cols_ = d;
    f.storage_ = std::move(file);
    f.validate();
    return f;
  }

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] std::span<const float> row(std::size_t i) const { return {data_ + i * cols_, cols_}; }
  [[nodiscard]] MatrixView view() const { return {data_, rows_, cols_}; }

  /// Copies the given rows into a contiguous matrix, optionally L2-normalized.
  [[nodiscard]] DenseMatrix gather(std::span<const std::size_t> row_indices, bool normalize = false) const {
    DenseMatrix out(row_indices.size(), cols_);
    for (std::size_t i = 0; i < row_indices.size(); ++i) {
      auto src = row(row_indices[i]);
      auto dst = out.row(i);
      std::copy(src.begin(), src.end(), dst.begin());
      if (normalize) {
        double ss = 0.0;
        for (float v : src) ss += static_cast<double>(v) * v;
        const double inv = 1.0 / std::sqrt(ss);
        for (float& v : dst) v = static_cast<float>(v * inv);
      }
    }
    return out;
  }

 private:
  void validate() const {
    for (std::size_t i = 0; i < rows_; ++i) {
      bool nonzero = false;
      for (float v : row(i)) {
        if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteFeature, "row " + std::to_string(i) + " has a non-finite entry");
        nonzero |= (v != 0.0f);
      }
      if (!nonzero) throw Error(ErrorKind::ZeroNormFeature, "row " + std::to_string(i) + " is all zeros");
    }
  }

  std::shared_ptr<const void> storage_;
  const float* data_ = nullptr;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
};

inline FeatureMatrix load_features(const std::string& path, const DatasetManifest& manifest) {
  FeatureMatrix f = FeatureMatrix::map_file(path);
  if (f.rows() != manifest.image_count())
    throw Error(ErrorKind::RowCountMismatch, "feature file has " + std::to_string(f.rows()) + " rows, manifest has " +
                                                 std::to_string(manifest.image_count()) + " image samples");
  return f;
}

inline std::string serialize_features_header(std::uint64_t n, std::uint32_t d) {
  std::string out(kFeatureHeaderBytes, '\0');
  std::memcpy(out.data(), kFeatureMagic.data(), kFeatureMagic.size());
  std::memcpy(out.data() + 8, &kFeatureVersion, 4);
  std::memcpy(out.data() + 12, &n, 8);
  std::memcpy(out.data() + 20, &d, 4);
  return out;
}

inline void save_features(const MatrixView& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path);
  auto header = serialize_features_header(m.rows, static_cast<std::uint32_t>(m.cols));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(m.data), static_cast<std::streamsize>(m.rows * m.cols * sizeof(float)));
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path);
}

}  // namespace presel
