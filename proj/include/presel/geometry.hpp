#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "presel/error.hpp"
#include "presel/features.hpp"
#include "presel/util.hpp"

namespace presel {

namespace detail {

// Fixed 16-lane accumulation: vectorizes without -ffast-math and gives the
// same bits for a given pair of rows no matter which thread computes it.
inline float squared_distance_f32(const float* a, const float* b, std::size_t d) {
  float acc[16] = {};
  std::size_t j = 0;
  for (; j + 16 <= d; j += 16)
    for (std::size_t l = 0; l < 16; ++l) {
      float t = a[j + l] - b[j + l];
      acc[l] += t * t;
    }
  float tail = 0.0f;
  for (; j < d; ++j) {
    float t = a[j] - b[j];
    tail += t * t;
  }
  for (std::size_t w = 8; w > 0; w /= 2)
    for (std::size_t l = 0; l < w; ++l) acc[l] += acc[l + w];
  return acc[0] + tail;
}

inline double squared_distance_f64(const float* a, const double* c, std::size_t d) {
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double t = static_cast<double>(a[j]) - c[j];
    s += t * t;
  }
  return s;
}

inline double dot_f64(const float* a, const float* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) s += static_cast<double>(a[j]) * static_cast<double>(b[j]);
  return s;
}

}  // namespace detail

struct KMeansOptions {
  std::size_t max_iter = 100;
  double tol = 1e-4;  // relative centroid movement: ||dC||_F <= tol * ||C||_F
  std::size_t threads = 1;
};

struct ClusterAssignment {
  std::string task_id;
  std::size_t clusters = 0;
  std::size_t dim = 0;
  std::vector<std::size_t> labels;     // per input row, in input order
  std::vector<double> centroids;       // clusters x dim, row-major
  std::vector<std::size_t> sizes;
  double inertia = 0.0;                // sum of squared distances to own centroid
  std::size_t iterations = 0;
  std::vector<double> inertia_history;  // after each assignment step

  [[nodiscard]] std::span<const double> centroid(std::size_t c) const { return {centroids.data() + c * dim, dim}; }

  /// Input-row indices of each cluster, ascending.
  [[nodiscard]] std::vector<std::vector<std::size_t>> members() const {
    std::vector<std::vector<std::size_t>> out(clusters);
    for (std::size_t i = 0; i < labels.size(); ++i) out[labels[i]].push_back(i);
    return out;
  }
};

/// Clusters per task: round(pool * clusters_per_100 / 100), at least 1 and at
/// most the pool size.
inline std::size_t default_cluster_count(std::size_t pool_size, double clusters_per_100 = 1.0) {
  if (pool_size == 0) return 0;
  auto c = round_half_up(static_cast<double>(pool_size) * clusters_per_100 / 100.0);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max<std::int64_t>(c, 1)), 1, pool_size);
}

/// Lloyd's k-means with greedy k-means++ seeding on raw Euclidean features.
///
/// Rows are processed in a canonical (lexicographic) order, so the result does
/// not depend on the order rows are given in. Reassignment only moves a point
/// when its exact (double) distance strictly improves, which keeps inertia
/// non-increasing across iterations. Empty clusters take the point farthest
/// from its centroid.
inline ClusterAssignment kmeans(const MatrixView& x, std::size_t clusters, std::uint64_t seed, const KMeansOptions& opt = {}) {
  const std::size_t n = x.rows;
  const std::size_t d = x.cols;
  if (clusters == 0) throw Error(ErrorKind::InvalidClusterCount, "cluster count must be positive");
  if (clusters > n)
    throw Error(ErrorKind::TooManyClusters, std::to_string(clusters) + " clusters requested for " + std::to_string(n) + " points");

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
    auto ra = x.row(a), rb = x.row(b);
    if (std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end())) return true;
    if (std::lexicographical_compare(rb.begin(), rb.end(), ra.begin(), ra.end())) return false;
    return a < b;
  });
  std::vector<float> pts(n * d);
  for (std::size_t i = 0; i < n; ++i) std::copy_n(x.data + perm[i] * d, d, pts.data() + i * d);
  auto pt = [&](std::size_t i) { return pts.data() + i * d; };

  std::vector<double> cent(clusters * d);
  std::vector<float> cent_f(clusters * d);
  auto sync_float = [&] {
    for (std::size_t i = 0; i < cent.size(); ++i) cent_f[i] = static_cast<float>(cent[i]);
  };

  // Greedy k-means++: each step draws several candidates by D^2 and keeps the
  // one that lowers the potential most.
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(clusters)));
  std::vector<bool> chosen(n, false);
  std::vector<double> closest(n);
  auto set_center = [&](std::size_t c, std::size_t i) {
    for (std::size_t j = 0; j < d; ++j) cent[c * d + j] = pt(i)[j];
    chosen[i] = true;
  };
  std::size_t first = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  set_center(0, first);
  parallel_for(n, opt.threads, [&](std::size_t i) { closest[i] = detail::squared_distance_f32(pt(i), pt(first), d); });
  std::vector<double> cand_dist(n);
  std::vector<double> best_dist(n);
  for (std::size_t c = 1; c < clusters; ++c) {
    double potential = 0.0;
    for (double v : closest) potential += v;
    std::size_t best_cand = n;
    double best_pot = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < trials; ++t) {
      std::size_t cand = n;
      if (potential > 0.0) {
        double r = unit(rng) * potential;
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          acc += closest[i];
          if (closest[i] > 0.0 && acc >= r) {
            cand = i;
            break;
          }
        }
        if (cand == n)
          for (std::size_t i = n; i-- > 0;)
            if (closest[i] > 0.0) {
              cand = i;
              break;
            }
      }
      if (cand == n) {
        // All remaining points coincide with a chosen center: pick uniformly among unchosen rows.
        std::size_t free = 0;
        for (bool b : chosen) free += b ? 0 : 1;
        std::size_t k = std::uniform_int_distribution<std::size_t>(0, free - 1)(rng);
        for (std::size_t i = 0; i < n; ++i)
          if (!chosen[i] && k-- == 0) {
            cand = i;
            break;
          }
      }
      parallel_for(n, opt.threads, [&](std::size_t i) {
        cand_dist[i] = std::min(closest[i], static_cast<double>(detail::squared_distance_f32(pt(i), pt(cand), d)));
      });
      double pot = 0.0;
      for (double v : cand_dist) pot += v;
      if (pot < best_pot) {
        best_pot = pot;
        best_cand = cand;
        best_dist.swap(cand_dist);
      }
      if (potential <= 0.0) break;
    }
    set_center(c, best_cand);
    closest.swap(best_dist);
    best_dist.resize(n);
  }
  sync_float();

  std::vector<std::size_t> label(n, 0);
  const std::size_t none = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> prev(n, none);

  auto assign = [&] {
    parallel_for(n, opt.threads, [&](std::size_t i) {
      std::size_t best = 0;
      float bd = std::numeric_limits<float>::infinity();
      for (std::size_t c = 0; c < clusters; ++c) {
        float dist = detail::squared_distance_f32(pt(i), &cent_f[c * d], d);
        if (dist < bd) {
          bd = dist;
          best = c;
        }
      }
      std::size_t cur = prev[i];
      if (cur == none || best == cur) {
        label[i] = best;
        return;
      }
      double exact_best = detail::squared_distance_f64(pt(i), &cent[best * d], d);
      double exact_cur = detail::squared_distance_f64(pt(i), &cent[cur * d], d);
      label[i] = exact_best < exact_cur ? best : cur;
    });
  };

  std::vector<double> own_dist(n);
  auto compute_own = [&] {
    parallel_for(n, opt.threads, [&](std::size_t i) { own_dist[i] = detail::squared_distance_f64(pt(i), &cent[label[i] * d], d); });
  };
  auto total = [&] {
    double s = 0.0;
    for (double v : own_dist) s += v;
    return s;
  };

  std::vector<std::size_t> sizes(clusters, 0);
  auto count_sizes = [&] {
    std::fill(sizes.begin(), sizes.end(), 0);
    for (std::size_t l : label) ++sizes[l];
  };

  auto repair_empty = [&] {
    count_sizes();
    bool any_empty = std::find(sizes.begin(), sizes.end(), 0) != sizes.end();
    if (!any_empty) return false;
    compute_own();
    for (std::size_t c = 0; c < clusters; ++c) {
      if (sizes[c] != 0) continue;
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i)
        if (sizes[label[i]] > 1 && (far == n || own_dist[i] > own_dist[far])) far = i;
      --sizes[label[far]];
      label[far] = c;
      sizes[c] = 1;
      own_dist[far] = 0.0;
      for (std::size_t j = 0; j < d; ++j) cent[c * d + j] = pt(far)[j];
    }
    return true;
  };

  auto update_means = [&] {
    std::vector<double> sum(clusters * d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double* s = &sum[label[i] * d];
      const float* p = pt(i);
      for (std::size_t j = 0; j < d; ++j) s[j] += p[j];
    }
    double shift = 0.0, norm = 0.0;
    for (std::size_t c = 0; c < clusters; ++c) {
      for (std::size_t j = 0; j < d; ++j) {
        double m = sum[c * d + j] / static_cast<double>(sizes[c]);
        double old = cent[c * d + j];
        shift += (m - old) * (m - old);
        norm += old * old;
        cent[c * d + j] = m;
      }
    }
    sync_float();
    return std::sqrt(shift) <= opt.tol * std::sqrt(norm);
  };

  ClusterAssignment out;
  assign();
  std::size_t iter = 0;
  for (; iter < std::max<std::size_t>(opt.max_iter, 1); ++iter) {
    repair_empty();
    bool converged = update_means();
    prev = label;
    assign();
    compute_own();
    double inertia = total();
    assert(out.inertia_history.empty() || inertia <= out.inertia_history.back());
    out.inertia_history.push_back(inertia);
    if (converged) {
      ++iter;
      break;
    }
  }
  if (repair_empty()) update_means();
  count_sizes();
  compute_own();

  out.clusters = clusters;
  out.dim = d;
  out.iterations = iter;
  out.centroids = std::move(cent);
  out.sizes = sizes;
  out.inertia = total();
  out.labels.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) out.labels[perm[i]] = label[i];
  return out;
}

// --- neighbor centrality ---------------------------------------------------

struct NcResult {
  std::vector<double> scores;
  std::vector<std::vector<std::size_t>> neighbors;  // per point, nearest first
};

inline double cosine_similarity(const float* a, const float* b, double sq_norm_a, double sq_norm_b, std::size_t d) {
  double s = detail::dot_f64(a, b, d) / std::sqrt(sq_norm_a * sq_norm_b);
  return std::clamp(s, -1.0, 1.0);
}

/// Neighbor centrality of every row: mean cosine similarity to its k nearest
/// rows by cosine distance, self excluded, similarity ties to the lower row.
/// With fewer than k other rows all of them are used; a lone row scores 1.
inline NcResult nc_scores_with_neighbors(const MatrixView& x, std::size_t k, std::size_t threads = 1) {
  if (k == 0) throw Error(ErrorKind::InvalidConfig, "k must be positive");
  const std::size_t m = x.rows;
  const std::size_t d = x.cols;
  NcResult out;
  out.scores.assign(m, 1.0);
  out.neighbors.assign(m, {});
  if (m == 0) return out;
  std::vector<double> sq(m);
  for (std::size_t i = 0; i < m; ++i) {
    sq[i] = detail::dot_f64(x.data + i * d, x.data + i * d, d);
    if (!(sq[i] > 0.0)) throw Error(ErrorKind::ZeroNormFeature, "row " + std::to_string(i) + " has zero norm");
  }
  if (m == 1) return out;
  const std::size_t kk = std::min(k, m - 1);
  parallel_for(m, threads, [&](std::size_t i) {
    std::vector<std::pair<double, std::size_t>> sims;
    sims.reserve(m - 1);
    for (std::size_t j = 0; j < m; ++j)
      if (j != i) sims.emplace_back(cosine_similarity(x.data + i * d, x.data + j * d, sq[i], sq[j], d), j);
    std::partial_sort(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(kk), sims.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
    double s = 0.0;
    auto& nb = out.neighbors[i];
    nb.reserve(kk);
    for (std::size_t t = 0; t < kk; ++t) {
      s += sims[t].first;
      nb.push_back(sims[t].second);
    }
    out.scores[i] = s / static_cast<double>(kk);
  });
  return out;
}

inline std::vector<double> nc_scores(const MatrixView& x, std::size_t k, std::size_t threads = 1) {
  return nc_scores_with_neighbors(x, k, threads).scores;
}

}  // namespace presel
