#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "presel/presel.hpp"

namespace presel::testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "presel") {
    auto base = std::filesystem::temp_directory_path();
    std::random_device rd;
    path_ = base / (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] std::string file(const std::string& name) const { return (path_ / name).string(); }
  [[nodiscard]] const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Isotropic Gaussian blobs with centers on a scaled simplex-like layout.
struct Blobs {
  DenseMatrix x;
  std::vector<std::size_t> truth;
  std::vector<std::vector<double>> centers;
};

inline Blobs make_blobs(std::size_t n, std::size_t d, std::size_t blobs, double separation, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Blobs b;
  b.x = DenseMatrix(n, d);
  b.centers.assign(blobs, std::vector<double>(d, 0.0));
  // Center c sits at separation*sigma/sqrt(2) along axis c (and a shared
  // offset so no point is near the origin); pairwise distance = separation*sigma.
  for (std::size_t c = 0; c < blobs; ++c) {
    for (std::size_t j = 0; j < d; ++j) b.centers[c][j] = 3.0 * separation * sigma;
    b.centers[c][c % d] += separation * sigma / std::sqrt(2.0) * (c < d ? 1.0 : -1.0);
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c = i % blobs;
    b.truth.push_back(c);
    for (std::size_t j = 0; j < d; ++j) b.x.row(i)[j] = static_cast<float>(b.centers[c][j] + sigma * normal(rng));
  }
  return b;
}

// True iff the labels partition points exactly like the truth (bijective
// label matching with zero disagreements).
inline bool perfect_recovery(const std::vector<std::size_t>& labels, const std::vector<std::size_t>& truth) {
  std::map<std::size_t, std::size_t> fwd, back;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [f, fi] = fwd.emplace(labels[i], truth[i]);
    if (!fi && f->second != truth[i]) return false;
    auto [b, bi] = back.emplace(truth[i], labels[i]);
    if (!bi && b->second != labels[i]) return false;
  }
  return true;
}

inline std::vector<LossRecord> token_losses(const DatasetManifest& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  std::vector<LossRecord> out;
  for (const auto& r : m.records())
    if (r.is_reference && !r.text_only) {
      LossRecord l;
      l.sample_id = r.sample_id;
      l.nll_with_q = u(rng);
      l.nll_without_q = u(rng);
      out.push_back(l);
    }
  return out;
}

}  // namespace presel::testing
