#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "docsim/error.hpp"
#include "docsim/pool.hpp"
#include "docsim/rng.hpp"
#include "docsim/sparse.hpp"

namespace docsim {

/// Rank-k factors of a document-feature matrix. right_vectors holds the k
/// right singular vectors as rows (k x n); doc_vectors holds the reduced
/// document coordinates U*Sigma as rows (m x k). Only {k, n, singular
/// values, right vectors} are persisted; document vectors are recomputed by
/// projection.
struct SvdFactors {
  int32_t k = 0;
  int32_t dim = 0;  // n, the feature dimensionality
  std::vector<double> singular_values;
  Eigen::MatrixXd right_vectors;  // k x n
  Eigen::MatrixXd doc_vectors;    // m x k
  bool converged = true;
  int iterations_run = 0;
};

namespace detail {

// Y = A * W for a sparse-row matrix A (m x n) and dense W (n x c),
// partition-parallel over rows.
inline Eigen::MatrixXd rows_times_dense(std::span<const SparseVector> rows,
                                        const Eigen::MatrixXd& w,
                                        unsigned workers) {
  Eigen::MatrixXd y(rows.size(), w.cols());
  parallel_partitions(rows.size(), workers, [&](size_t, size_t lo, size_t hi) {
    for (size_t i = lo; i < hi; ++i) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        double s = 0.0;
        for (size_t t = 0; t < rows[i].idx.size(); ++t)
          s += rows[i].val[t] * w(rows[i].idx[t], c);
        y(static_cast<Eigen::Index>(i), c) = s;
      }
    }
  });
  return y;
}

// Z = A^T * Y accumulated as sum_i x_i y_i^T; per-partition partials are
// combined in partition order so the result is worker-count invariant.
inline Eigen::MatrixXd rows_transpose_times_dense(
    std::span<const SparseVector> rows, const Eigen::MatrixXd& y, int32_t n,
    unsigned workers) {
  auto partials = map_partitions<Eigen::MatrixXd>(
      rows.size(), workers, [&](size_t, size_t lo, size_t hi) {
        Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n, y.cols());
        for (size_t i = lo; i < hi; ++i) {
          for (size_t t = 0; t < rows[i].idx.size(); ++t) {
            const auto r = static_cast<Eigen::Index>(rows[i].idx[t]);
            const double v = rows[i].val[t];
            for (Eigen::Index c = 0; c < y.cols(); ++c)
              z(r, c) += v * y(static_cast<Eigen::Index>(i), c);
          }
        }
        return z;
      });
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n, y.cols());
  for (const auto& p : partials) z += p;
  return z;
}

}  // namespace detail

/// Randomized truncated SVD: Gaussian range finder with power iterations
/// (re-orthonormalized each step), then a dense SVD of the projected small
/// matrix. Row access is streaming and partition-parallel; the small
/// factorization is single-threaded.
inline SvdFactors truncated_svd(std::span<const SparseVector> rows, int32_t k,
                                int iterations, uint64_t seed = 0x5eed,
                                unsigned workers = 1) {
  if (rows.empty()) throw DataError("truncated_svd: no rows");
  const int32_t n = rows.front().dim;
  for (const auto& r : rows)
    if (r.dim != n) throw ParamError("truncated_svd: mixed dims");
  if (k < 1 || k >= n)
    throw ParamError("truncated_svd: need 1 <= k < feature dim");
  if (rows.size() < static_cast<size_t>(k))
    throw ParamError("truncated_svd: k exceeds document count");
  if (iterations < 0) throw ParamError("truncated_svd: negative iterations");

  const auto m = static_cast<Eigen::Index>(rows.size());
  const int32_t oversample = 10;
  const auto ell = static_cast<Eigen::Index>(
      std::min<int64_t>(static_cast<int64_t>(k) + oversample, n));

  // Deterministic Gaussian test matrix.
  Eigen::MatrixXd omega(n, ell);
  {
    Rng rng(seed);
    for (Eigen::Index c = 0; c < ell; ++c)
      for (Eigen::Index r = 0; r < n; ++r) omega(r, c) = rng.normal();
  }

  Eigen::MatrixXd y = detail::rows_times_dense(rows, omega, workers);

  bool converged = iterations == 0;
  Eigen::VectorXd prev_proxy;
  for (int it = 0; it < iterations; ++it) {
    Eigen::MatrixXd z = detail::rows_transpose_times_dense(rows, y, n, workers);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(z);
    // Convergence proxy: the k largest R-diagonal magnitudes track the
    // dominant spectrum of A^T A. The oversampled tail is excluded; it can
    // rotate indefinitely under near-degenerate or noise-level values.
    Eigen::VectorXd proxy = qr.matrixQR().topRows(ell).diagonal().cwiseAbs();
    std::sort(proxy.data(), proxy.data() + proxy.size(),
              std::greater<double>());
    proxy.conservativeResize(std::min<Eigen::Index>(k, proxy.size()));
    if (prev_proxy.size() == proxy.size()) {
      double rel = 0.0;
      for (Eigen::Index i = 0; i < proxy.size(); ++i) {
        const double denom = std::max(proxy[i], 1e-300);
        rel = std::max(rel, std::abs(proxy[i] - prev_proxy[i]) / denom);
      }
      converged = rel < 1e-9;
    }
    prev_proxy = proxy;
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, ell);
    y = detail::rows_times_dense(rows, q, workers);
  }

  Eigen::HouseholderQR<Eigen::MatrixXd> qr_y(y);
  Eigen::MatrixXd q = qr_y.householderQ() * Eigen::MatrixXd::Identity(m, ell);

  // B = Q^T A, small (ell x n).
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(ell, n);
  {
    auto partials = map_partitions<Eigen::MatrixXd>(
        rows.size(), workers, [&](size_t, size_t lo, size_t hi) {
          Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(ell, n);
          for (size_t i = lo; i < hi; ++i) {
            for (size_t t = 0; t < rows[i].idx.size(); ++t) {
              const auto c = static_cast<Eigen::Index>(rows[i].idx[t]);
              const double v = rows[i].val[t];
              for (Eigen::Index r = 0; r < ell; ++r)
                acc(r, c) += q(static_cast<Eigen::Index>(i), r) * v;
            }
          }
          return acc;
        });
    for (const auto& p : partials) b += p;
  }

  Eigen::BDCSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);

  SvdFactors f;
  f.k = k;
  f.dim = n;
  f.iterations_run = iterations;
  f.converged = converged;
  f.singular_values.resize(static_cast<size_t>(k));
  for (int32_t j = 0; j < k; ++j)
    f.singular_values[static_cast<size_t>(j)] = svd.singularValues()(j);

  f.right_vectors = svd.matrixV().leftCols(k).transpose();  // k x n
  Eigen::MatrixXd u = q * svd.matrixU().leftCols(k);        // m x k

  // Sign convention: make each right vector's largest-magnitude component
  // positive, flipping the matching U column to preserve the product.
  for (int32_t j = 0; j < k; ++j) {
    Eigen::Index arg = 0;
    f.right_vectors.row(j).cwiseAbs().maxCoeff(&arg);
    if (f.right_vectors(j, arg) < 0.0) {
      f.right_vectors.row(j) = -f.right_vectors.row(j);
      u.col(j) = -u.col(j);
    }
  }

  f.doc_vectors = u;
  for (int32_t j = 0; j < k; ++j)
    f.doc_vectors.col(j) *= f.singular_values[static_cast<size_t>(j)];
  return f;
}

/// Concept-space coordinates of a feature vector: right_vectors * v.
/// Reproduces a training document's stored U*Sigma row up to the
/// factorization tolerance.
inline std::vector<double> project(const SvdFactors& f, const SparseVector& v) {
  if (v.dim != f.dim) throw ParamError("project: dim mismatch");
  std::vector<double> out(static_cast<size_t>(f.k), 0.0);
  for (int32_t j = 0; j < f.k; ++j) {
    double s = 0.0;
    for (size_t t = 0; t < v.idx.size(); ++t)
      s += v.val[t] * f.right_vectors(j, v.idx[t]);
    out[static_cast<size_t>(j)] = s;
  }
  return out;
}

// Factors checkpoint: u32 k, u32 n, k singular values, then the k x n right
// vectors row-major; all little-endian 64-bit floats.
inline void save_factors(const SvdFactors& f, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write factors: " + path.string());
  auto put_u32 = [&](uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 4);
  };
  auto put_f64 = [&](double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    os.write(b, 8);
  };
  put_u32(static_cast<uint32_t>(f.k));
  put_u32(static_cast<uint32_t>(f.dim));
  for (double s : f.singular_values) put_f64(s);
  for (int32_t r = 0; r < f.k; ++r)
    for (int32_t c = 0; c < f.dim; ++c) put_f64(f.right_vectors(r, c));
  if (!os) throw DataError("factors write failed: " + path.string());
}

inline SvdFactors load_factors(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open factors: " + path.string());
  auto get_u32 = [&]() -> uint32_t {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
      throw DataError("truncated factors: " + path.string());
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) |
           (static_cast<uint32_t>(b[3]) << 24);
  };
  auto get_f64 = [&]() -> double {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8))
      throw DataError("truncated factors: " + path.string());
    uint64_t bits = 0;
    for (int i = 7; i >= 0; --i) bits = (bits << 8) | b[i];
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  };
  SvdFactors f;
  f.k = static_cast<int32_t>(get_u32());
  f.dim = static_cast<int32_t>(get_u32());
  f.singular_values.resize(static_cast<size_t>(f.k));
  for (double& s : f.singular_values) s = get_f64();
  f.right_vectors.resize(f.k, f.dim);
  for (int32_t r = 0; r < f.k; ++r)
    for (int32_t c = 0; c < f.dim; ++c) f.right_vectors(r, c) = get_f64();
  return f;
}

}  // namespace docsim
