#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "support.hpp"

using namespace presel;
using presel::testing::make_blobs;
using presel::testing::perfect_recovery;

namespace {

DenseMatrix random_unit_vectors(std::size_t m, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseMatrix x(m, d);
  for (std::size_t i = 0; i < m; ++i) {
    double ss = 0.0;
    std::vector<double> v(d);
    for (double& t : v) {
      t = normal(rng);
      ss += t * t;
    }
    for (std::size_t j = 0; j < d; ++j) x.row(i)[j] = static_cast<float>(v[j] / std::sqrt(ss));
  }
  return x;
}

// Exhaustive oracle: every pairwise similarity, full sort, ties to lower index.
NcResult brute_force_nc(const DenseMatrix& x, std::size_t k) {
  const std::size_t m = x.rows, d = x.cols;
  std::vector<double> sq(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < d; ++j) sq[i] += static_cast<double>(x.row(i)[j]) * x.row(i)[j];
  std::vector<std::vector<double>> sim(m, std::vector<double>(m));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double dot = 0.0;
      for (std::size_t t = 0; t < d; ++t) dot += static_cast<double>(x.row(i)[t]) * x.row(j)[t];
      sim[i][j] = std::clamp(dot / std::sqrt(sq[i] * sq[j]), -1.0, 1.0);
    }
  NcResult r;
  r.scores.assign(m, 1.0);
  r.neighbors.assign(m, {});
  if (m == 1) return r;
  std::size_t kk = std::min(k, m - 1);
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < m; ++j)
      if (j != i) others.push_back(j);
    std::stable_sort(others.begin(), others.end(), [&](std::size_t a, std::size_t b) { return sim[i][a] > sim[i][b]; });
    double s = 0.0;
    for (std::size_t t = 0; t < kk; ++t) {
      s += sim[i][others[t]];
      r.neighbors[i].push_back(others[t]);
    }
    r.scores[i] = s / kk;
  }
  return r;
}

}  // namespace

TEST(KMeans, SingleClusterIsColumnMean) {
  DenseMatrix x(4, 2, {1, 2, 3, 4, 5, 6, 7, 9});
  auto a = kmeans(x.view(), 1, 1);
  for (auto l : a.labels) EXPECT_EQ(l, 0u);
  EXPECT_DOUBLE_EQ(a.centroid(0)[0], 4.0);
  EXPECT_DOUBLE_EQ(a.centroid(0)[1], 5.25);
  EXPECT_EQ(a.sizes, (std::vector<std::size_t>{4}));
}

TEST(KMeans, EachPointItsOwnCluster) {
  DenseMatrix x(6, 2, {0, 1, 5, 5, -3, 2, 8, 1, 0.5, 0.5, 2, -7});
  auto a = kmeans(x.view(), 6, 3);
  std::vector<std::size_t> l = a.labels;
  std::sort(l.begin(), l.end());
  EXPECT_EQ(l, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));
  EXPECT_EQ(a.inertia, 0.0);
}

TEST(KMeans, ClusterCountErrors) {
  DenseMatrix x(3, 1, {1, 2, 3});
  try {
    (void)kmeans(x.view(), 4, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TooManyClusters);
  }
  try {
    (void)kmeans(x.view(), 0, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidClusterCount);
  }
}

TEST(KMeans, TwoSeparatedBlobsRecoveredExactly) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto b = make_blobs(200, 2, 2, 20.0, 1.0, 100 + seed);
    auto a = kmeans(b.x.view(), 2, seed);
    EXPECT_TRUE(perfect_recovery(a.labels, b.truth)) << "seed " << seed;
  }
}

TEST(KMeans, FiveBlobsInertiaNonIncreasing) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto b = make_blobs(1000, 16, 5, 20.0, 1.0, seed);
    auto a = kmeans(b.x.view(), 5, seed);
    EXPECT_TRUE(perfect_recovery(a.labels, b.truth)) << "seed " << seed;
    for (std::size_t i = 1; i < a.inertia_history.size(); ++i) EXPECT_LE(a.inertia_history[i], a.inertia_history[i - 1]);
    std::size_t total = 0;
    for (auto s : a.sizes) {
      EXPECT_GT(s, 0u);
      total += s;
    }
    EXPECT_EQ(total, 1000u);
  }
}

TEST(KMeans, InvariantToRowOrder) {
  auto b = make_blobs(300, 8, 4, 6.0, 1.0, 42);
  std::vector<std::size_t> perm(300);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(1);
  std::shuffle(perm.begin(), perm.end(), rng);
  DenseMatrix y(300, 8);
  for (std::size_t i = 0; i < 300; ++i) std::copy_n(b.x.row(perm[i]).data(), 8, y.row(i).data());
  auto a = kmeans(b.x.view(), 7, 5);
  auto c = kmeans(y.view(), 7, 5);
  for (std::size_t i = 0; i < 300; ++i) EXPECT_EQ(c.labels[i], a.labels[perm[i]]);
  EXPECT_EQ(a.centroids, c.centroids);
  EXPECT_EQ(a.inertia, c.inertia);
}

TEST(KMeans, ThreadCountDoesNotChangeResult) {
  auto b = make_blobs(2000, 24, 6, 3.0, 1.0, 8);
  auto a1 = kmeans(b.x.view(), 20, 9, {100, 1e-4, 1});
  auto a4 = kmeans(b.x.view(), 20, 9, {100, 1e-4, 4});
  EXPECT_EQ(a1.labels, a4.labels);
  EXPECT_EQ(a1.centroids, a4.centroids);
  EXPECT_EQ(a1.inertia_history, a4.inertia_history);
}

TEST(KMeans, DuplicatePointsNeverLeaveEmptyClusters) {
  DenseMatrix x(10, 2);
  for (std::size_t i = 0; i < 10; ++i) {
    x.row(i)[0] = i < 8 ? 1.0f : 2.0f;
    x.row(i)[1] = 1.0f;
  }
  auto a = kmeans(x.view(), 4, 0);
  for (auto s : a.sizes) EXPECT_GT(s, 0u);
}

TEST(DefaultClusterCount, Examples) {
  EXPECT_EQ(default_cluster_count(1000), 10u);
  EXPECT_EQ(default_cluster_count(50), 1u);
  EXPECT_EQ(default_cluster_count(149), 1u);
  EXPECT_EQ(default_cluster_count(151), 2u);
  EXPECT_EQ(default_cluster_count(150), 2u);
  EXPECT_EQ(default_cluster_count(1), 1u);
  EXPECT_EQ(default_cluster_count(10, 50.0), 5u);
}

TEST(NeighborCentrality, Examples) {
  DenseMatrix same(3, 2, {0.6f, 0.8f, 0.6f, 0.8f, 0.6f, 0.8f});
  for (double s : nc_scores(same.view(), 2)) EXPECT_EQ(s, 1.0);
  DenseMatrix ortho(2, 2, {1, 0, 0, 1});
  for (double s : nc_scores(ortho.view(), 1)) EXPECT_EQ(s, 0.0);
  DenseMatrix lone(1, 3, {1, 2, 3});
  EXPECT_EQ(nc_scores(lone.view(), 5), std::vector<double>{1.0});
}

TEST(NeighborCentrality, FewerPointsThanK) {
  DenseMatrix x(3, 2, {1, 0, 0, 1, 1, 1});
  auto r = nc_scores_with_neighbors(x.view(), 10);
  for (const auto& nb : r.neighbors) EXPECT_EQ(nb.size(), 2u);
  auto o = brute_force_nc(x, 10);
  EXPECT_EQ(r.scores, o.scores);
}

TEST(NeighborCentrality, MatchesBruteForceOracle) {
  for (std::size_t k : {1u, 5u, 10u, 20u}) {
    auto x = random_unit_vectors(500, 16, 77 + k);
    auto r = nc_scores_with_neighbors(x.view(), k, 3);
    auto o = brute_force_nc(x, k);
    EXPECT_EQ(r.neighbors, o.neighbors) << "k=" << k;
    for (std::size_t i = 0; i < 500; ++i) EXPECT_NEAR(r.scores[i], o.scores[i], 1e-6);
    EXPECT_EQ(r.scores, o.scores);
  }
}

TEST(NeighborCentrality, TiesGoToLowerIndex) {
  // Rows 1, 2, 3 are identical and equally similar to row 0.
  DenseMatrix x(4, 2, {1, 0, 1, 1, 1, 1, 1, 1});
  auto r = nc_scores_with_neighbors(x.view(), 2);
  EXPECT_EQ(r.neighbors[0], (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(r.neighbors[3], (std::vector<std::size_t>{1, 2}));
}

TEST(NeighborCentrality, ScaleInvariant) {
  auto x = random_unit_vectors(200, 12, 3);
  auto base = nc_scores(x.view(), 5);
  // Power-of-two factors scale float32 rows exactly.
  for (float a : {0.0009765625f, 4.0f, 256.0f}) {
    DenseMatrix y = x;
    for (float& v : y.values) v *= a;
    auto s = nc_scores(y.view(), 5);
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(s[i], base[i], 1e-9);
  }
  // Other factors round each stored entry to float32 first.
  for (float a : {0.001f, 3.0f, 250.0f}) {
    DenseMatrix y = x;
    for (float& v : y.values) v *= a;
    auto s = nc_scores(y.view(), 5);
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(s[i], base[i], 1e-6);
  }
}

TEST(NeighborCentrality, DuplicatesScoreExactlyOne) {
  std::mt19937_64 rng(4);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  for (std::size_t k : {1u, 5u, 10u}) {
    DenseMatrix x(40 + k + 1, 7);
    for (float& v : x.values) v = normal(rng);
    for (std::size_t c = 1; c <= k; ++c) std::copy_n(x.row(0).data(), 7, x.row(40 + c - 1).data());
    auto s = nc_scores(x.view(), k);
    EXPECT_EQ(s[0], 1.0);
    for (std::size_t c = 1; c <= k; ++c) EXPECT_EQ(s[40 + c - 1], 1.0);
  }
}

TEST(NeighborCentrality, ScoresWithinRange) {
  auto x = random_unit_vectors(300, 3, 12);
  for (double s : nc_scores(x.view(), 7)) {
    EXPECT_GE(s, -1.0);
    EXPECT_LE(s, 1.0);
  }
}
