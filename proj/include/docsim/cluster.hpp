#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "docsim/error.hpp"
#include "docsim/hash.hpp"
#include "docsim/pool.hpp"
#include "docsim/rng.hpp"
#include "docsim/sparse.hpp"

namespace docsim {

/// Lloyd k-means model. Centroids are dense; distances to sparse points use
/// ||x||^2 - 2 x.m + ||m||^2 with cached norms.
struct KMeansModel {
  int32_t k = 0;
  int32_t dim = 0;
  std::vector<std::vector<double>> centroids;
  double wcss = 0.0;
  int iterations_run = 0;
  // WCSS after each assignment step, ending with the converged value.
  std::vector<double> wcss_history;
  // Iterations whose update step re-seeded an empty cluster; the monotone
  // WCSS guarantee is suspended across those boundaries.
  std::vector<int> repair_iterations;
};

namespace detail {

inline double sq_dist_to_centroid(const SparseVector& x, double x_norm_sq,
                                  const std::vector<double>& c,
                                  double c_norm_sq) {
  double xc = 0.0;
  for (size_t i = 0; i < x.idx.size(); ++i)
    xc += x.val[i] * c[static_cast<size_t>(x.idx[i])];
  return x_norm_sq - 2.0 * xc + c_norm_sq;
}

inline int32_t nearest_centroid(const SparseVector& x, double x_norm_sq,
                                const std::vector<std::vector<double>>& cents,
                                const std::vector<double>& cent_norms,
                                double* best_d2_out = nullptr) {
  int32_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (size_t c = 0; c < cents.size(); ++c) {
    const double d2 = sq_dist_to_centroid(x, x_norm_sq, cents[c], cent_norms[c]);
    if (d2 < best_d2) {  // strict: ties keep the lowest cluster index
      best_d2 = d2;
      best = static_cast<int32_t>(c);
    }
  }
  if (best_d2_out) *best_d2_out = best_d2;
  return best;
}

inline uint64_t vector_fingerprint(const SparseVector& v) {
  uint64_t h = kFnvOffset;
  h = fnv1a64(v.idx.data(), v.idx.size() * sizeof(int32_t), h);
  h = fnv1a64(v.val.data(), v.val.size() * sizeof(double), h);
  return h;
}

// k-means++ seeding: first centroid uniform, then points sampled with
// probability proportional to squared distance from the nearest chosen seed.
inline std::vector<std::vector<double>> kmeanspp_seeds(
    std::span<const SparseVector> points, int32_t k, Rng& rng) {
  const size_t n = points.size();
  std::vector<std::vector<double>> seeds;
  seeds.reserve(static_cast<size_t>(k));

  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  size_t first = rng.index(n);
  seeds.push_back(points[first].to_dense());

  for (int32_t c = 1; c < k; ++c) {
    const auto& last = seeds.back();
    double last_norm = 0.0;
    for (double v : last) last_norm += v * v;
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double d = sq_dist_to_centroid(points[i], norm_sq(points[i]), last,
                                           last_norm);
      if (d < d2[i]) d2[i] = d;
      total += std::max(d2[i], 0.0);
    }
    size_t chosen = 0;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      chosen = n - 1;
      for (size_t i = 0; i < n; ++i) {
        acc += std::max(d2[i], 0.0);
        if (acc > r) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = rng.index(n);
    }
    seeds.push_back(points[chosen].to_dense());
  }
  return seeds;
}

}  // namespace detail

struct KMeansOptions {
  int max_iter = 50;
  double tol = 1e-4;
  uint64_t seed = 13;
  unsigned workers = 1;
  // Test hook: when set, used in place of k-means++ seeding.
  const std::vector<std::vector<double>>* initial_centroids = nullptr;
};

inline int32_t assign(const KMeansModel& model, const SparseVector& v);

/// Lloyd iterations with k-means++ seeding. Assignment ties break to the
/// lowest cluster index; an empty cluster is re-seeded to the point farthest
/// from its assigned centroid. Assignment runs partition-parallel; all
/// accumulation happens in point order, so the result is identical for any
/// worker count.
inline KMeansModel kmeans_fit(std::span<const SparseVector> points, int32_t k,
                              const KMeansOptions& opts = {}) {
  if (k < 1) throw ParamError("kmeans_fit: k must be >= 1");
  if (points.empty()) throw DataError("kmeans_fit: no points");
  if (opts.tol <= 0.0) throw ParamError("kmeans_fit: tol must be > 0");
  const int32_t dim = points.front().dim;
  for (const auto& p : points)
    if (p.dim != dim) throw ParamError("kmeans_fit: mixed dims");

  {
    std::unordered_set<uint64_t> distinct;
    for (const auto& p : points) {
      distinct.insert(detail::vector_fingerprint(p));
      if (distinct.size() >= static_cast<size_t>(k)) break;
    }
    if (distinct.size() < static_cast<size_t>(k))
      throw DataError("kmeans_fit: fewer distinct points than k");
  }

  const size_t n = points.size();
  std::vector<double> point_norms(n);
  for (size_t i = 0; i < n; ++i) point_norms[i] = norm_sq(points[i]);

  KMeansModel model;
  model.k = k;
  model.dim = dim;
  if (opts.initial_centroids) {
    if (opts.initial_centroids->size() != static_cast<size_t>(k))
      throw ParamError("kmeans_fit: initial centroid count != k");
    model.centroids = *opts.initial_centroids;
  } else {
    Rng rng(opts.seed);
    model.centroids = detail::kmeanspp_seeds(points, k, rng);
  }

  std::vector<int32_t> labels(n, 0);
  std::vector<double> dists(n, 0.0);

  auto assignment_pass = [&]() -> double {
    std::vector<double> cent_norms(static_cast<size_t>(k));
    for (int32_t c = 0; c < k; ++c) {
      double s = 0.0;
      for (double v : model.centroids[static_cast<size_t>(c)]) s += v * v;
      cent_norms[static_cast<size_t>(c)] = s;
    }
    auto partials = map_partitions<double>(
        n, opts.workers, [&](size_t, size_t lo, size_t hi) {
          double wcss = 0.0;
          for (size_t i = lo; i < hi; ++i) {
            double d2 = 0.0;
            labels[i] = detail::nearest_centroid(points[i], point_norms[i],
                                                 model.centroids, cent_norms,
                                                 &d2);
            dists[i] = d2;
            wcss += std::max(d2, 0.0);
          }
          return wcss;
        });
    double total = 0.0;
    for (double p : partials) total += p;
    return total;
  };

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    const double wcss = assignment_pass();
    model.wcss_history.push_back(wcss);
    model.iterations_run = iter + 1;

    // Update step: accumulate sums and counts in point order.
    std::vector<std::vector<double>> sums(
        static_cast<size_t>(k), std::vector<double>(static_cast<size_t>(dim), 0.0));
    std::vector<int64_t> counts(static_cast<size_t>(k), 0);
    for (size_t i = 0; i < n; ++i) {
      auto& s = sums[static_cast<size_t>(labels[i])];
      for (size_t j = 0; j < points[i].idx.size(); ++j)
        s[static_cast<size_t>(points[i].idx[j])] += points[i].val[j];
      ++counts[static_cast<size_t>(labels[i])];
    }

    bool repaired = false;
    std::vector<char> used_for_repair(n, 0);
    for (int32_t c = 0; c < k; ++c) {
      if (counts[static_cast<size_t>(c)] > 0) continue;
      // Re-seed to the point farthest from its assigned centroid.
      size_t farthest = 0;
      double far_d = -1.0;
      for (size_t i = 0; i < n; ++i) {
        if (used_for_repair[i]) continue;
        if (dists[i] > far_d) {
          far_d = dists[i];
          farthest = i;
        }
      }
      used_for_repair[farthest] = 1;
      sums[static_cast<size_t>(c)] = points[farthest].to_dense();
      counts[static_cast<size_t>(c)] = 1;
      repaired = true;
    }
    if (repaired) model.repair_iterations.push_back(iter);

    double max_move_sq = 0.0;
    for (int32_t c = 0; c < k; ++c) {
      auto& target = model.centroids[static_cast<size_t>(c)];
      const auto& s = sums[static_cast<size_t>(c)];
      const double inv = 1.0 / static_cast<double>(counts[static_cast<size_t>(c)]);
      double move_sq = 0.0;
      for (size_t j = 0; j < target.size(); ++j) {
        const double nv = s[j] * inv;
        const double d = nv - target[j];
        move_sq += d * d;
        target[j] = nv;
      }
      max_move_sq = std::max(max_move_sq, move_sq);
    }

    if (!repaired && std::sqrt(max_move_sq) < opts.tol) break;
  }

  // Final assignment against the converged centroids.
  model.wcss = assignment_pass();
  model.wcss_history.push_back(model.wcss);
  return model;
}

/// Nearest centroid by squared Euclidean distance, ties to the lowest index.
inline int32_t assign(const KMeansModel& model, const SparseVector& v) {
  if (v.dim != model.dim) throw ParamError("assign: dim mismatch");
  std::vector<double> cent_norms(static_cast<size_t>(model.k));
  for (int32_t c = 0; c < model.k; ++c) {
    double s = 0.0;
    for (double x : model.centroids[static_cast<size_t>(c)]) s += x * x;
    cent_norms[static_cast<size_t>(c)] = s;
  }
  return detail::nearest_centroid(v, norm_sq(v), model.centroids, cent_norms);
}

/// Labels for a whole corpus, partition-parallel.
inline std::vector<int32_t> assign_all(const KMeansModel& model,
                                       std::span<const SparseVector> points,
                                       unsigned workers = 1) {
  std::vector<double> cent_norms(static_cast<size_t>(model.k));
  for (int32_t c = 0; c < model.k; ++c) {
    double s = 0.0;
    for (double x : model.centroids[static_cast<size_t>(c)]) s += x * x;
    cent_norms[static_cast<size_t>(c)] = s;
  }
  std::vector<int32_t> labels(points.size());
  parallel_partitions(points.size(), workers, [&](size_t, size_t lo, size_t hi) {
    for (size_t i = lo; i < hi; ++i) {
      if (points[i].dim != model.dim) throw ParamError("assign: dim mismatch");
      labels[i] = detail::nearest_centroid(points[i], norm_sq(points[i]),
                                           model.centroids, cent_norms);
    }
  });
  return labels;
}

struct ElbowRow {
  int32_t k = 0;
  double wcss = 0.0;
  double seconds = 0.0;
  std::string error;  // non-empty when the fit for this k failed
};

/// One fit per k with a fixed seed, reporting WCSS against wall time.
inline std::vector<ElbowRow> elbow_scan(std::span<const SparseVector> points,
                                        std::vector<int32_t> k_values,
                                        const KMeansOptions& opts = {}) {
  if (k_values.empty()) throw ParamError("elbow_scan: no k values");
  std::sort(k_values.begin(), k_values.end());
  std::vector<ElbowRow> rows;
  for (int32_t k : k_values) {
    ElbowRow row;
    row.k = k;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      row.wcss = kmeans_fit(points, k, opts).wcss;
    } catch (const Error& e) {
      row.error = e.what();
    }
    row.seconds = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Exact pair-count arithmetic for candidate blocking: all pairs versus
/// same-cluster pairs under a uniform spread of N points over k clusters
/// (M = floor(N/k)).
struct PairReduction {
  uint64_t total_pairs = 0;
  uint64_t clustered_pairs = 0;
};

inline PairReduction estimate_pair_reduction(uint64_t n, uint64_t k) {
  if (n < 2) throw ParamError("estimate_pair_reduction: N must be >= 2");
  if (k < 1 || k > n)
    throw ParamError("estimate_pair_reduction: k must be in [1, N]");
  PairReduction r;
  r.total_pairs = n * (n - 1) / 2;
  const uint64_t m = n / k;
  r.clustered_pairs = k * (m * (m - 1) / 2);
  return r;
}

/// Model checkpoint: u32 k, u32 dim, then k*dim centroid doubles, all
/// little-endian.
inline void save_kmeans(const KMeansModel& model,
                        const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write model: " + path.string());
  auto put_u32 = [&](uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 4);
  };
  put_u32(static_cast<uint32_t>(model.k));
  put_u32(static_cast<uint32_t>(model.dim));
  for (const auto& c : model.centroids) {
    for (double v : c) {
      uint64_t bits;
      std::memcpy(&bits, &v, 8);
      char b[8];
      for (int i = 0; i < 8; ++i)
        b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
      os.write(b, 8);
    }
  }
  if (!os) throw DataError("model write failed: " + path.string());
}

inline KMeansModel load_kmeans(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open model: " + path.string());
  auto get_u32 = [&]() -> uint32_t {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
      throw DataError("truncated model: " + path.string());
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) |
           (static_cast<uint32_t>(b[3]) << 24);
  };
  KMeansModel model;
  model.k = static_cast<int32_t>(get_u32());
  model.dim = static_cast<int32_t>(get_u32());
  model.centroids.assign(static_cast<size_t>(model.k),
                         std::vector<double>(static_cast<size_t>(model.dim)));
  for (auto& c : model.centroids) {
    for (double& v : c) {
      unsigned char b[8];
      if (!is.read(reinterpret_cast<char*>(b), 8))
        throw DataError("truncated model: " + path.string());
      uint64_t bits = 0;
      for (int i = 7; i >= 0; --i) bits = (bits << 8) | b[i];
      std::memcpy(&v, &bits, 8);
    }
  }
  return model;
}

}  // namespace docsim
