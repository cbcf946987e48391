#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "docsim/lsa.hpp"
#include "docsim/rng.hpp"
#include "oracles.hpp"

using namespace docsim;

namespace {

std::vector<SparseVector> dense_rows_to_sparse(const oracles::Matrix& m) {
  std::vector<SparseVector> rows;
  rows.reserve(m.size());
  for (const auto& r : m) rows.push_back(SparseVector::from_dense(r));
  return rows;
}

oracles::Matrix random_matrix(Rng& rng, size_t m, size_t n) {
  oracles::Matrix a(m, std::vector<double>(n));
  for (auto& row : a)
    for (auto& v : row) v = rng.normal();
  return a;
}

double reconstruction_error(const oracles::Matrix& a, const SvdFactors& f) {
  // ||A - U S V^T||_F with U S = doc_vectors.
  double err = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    for (size_t j = 0; j < a[0].size(); ++j) {
      double approx = 0.0;
      for (int32_t c = 0; c < f.k; ++c)
        approx += f.doc_vectors(static_cast<Eigen::Index>(i), c) *
                  f.right_vectors(c, static_cast<Eigen::Index>(j));
      const double d = a[i][j] - approx;
      err += d * d;
    }
  }
  return std::sqrt(err);
}

}  // namespace

TEST_CASE("diagonal matrix gives exact top singular values", "[lsa]") {
  const oracles::Matrix a{{3, 0, 0}, {0, 2, 0}, {0, 0, 1}};
  const auto rows = dense_rows_to_sparse(a);
  const auto f = truncated_svd(rows, 2, 10, 1);
  REQUIRE(f.singular_values.size() == 2);
  CHECK(f.singular_values[0] == Catch::Approx(3.0).margin(1e-9));
  CHECK(f.singular_values[1] == Catch::Approx(2.0).margin(1e-9));
}

TEST_CASE("rank-1 matrix reconstructs exactly", "[lsa]") {
  Rng rng(404);
  const size_t m = 12, n = 7;
  std::vector<double> u(m), v(n);
  for (auto& x : u) x = rng.normal();
  for (auto& x : v) x = rng.normal();
  oracles::Matrix a(m, std::vector<double>(n));
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) a[i][j] = u[i] * v[j];

  const auto f = truncated_svd(dense_rows_to_sparse(a), 1, 7);
  CHECK(reconstruction_error(a, f) < 1e-9);
}

TEST_CASE("random matrices match the dense jacobi oracle", "[lsa]") {
  Rng rng(2024);
  for (int trial = 0; trial < 5; ++trial) {
    const auto a = random_matrix(rng, 50, 20);
    const auto rows = dense_rows_to_sparse(a);
    const auto f = truncated_svd(rows, 5, 30, 1 + static_cast<uint64_t>(trial));
    const auto oracle = oracles::dense_svd(a);
    for (size_t j = 0; j < 5; ++j) {
      CHECK(std::abs(f.singular_values[j] - oracle.singular_values[j]) /
                oracle.singular_values[j] <
            1e-6);
    }
    // Right vectors orthonormal.
    for (int32_t p = 0; p < f.k; ++p) {
      for (int32_t q = 0; q < f.k; ++q) {
        const double d = f.right_vectors.row(p).dot(f.right_vectors.row(q));
        CHECK(std::abs(d - (p == q ? 1.0 : 0.0)) < 1e-6);
      }
    }
    // Right vectors agree with the oracle's up to sign.
    for (int32_t j = 0; j < 5; ++j) {
      double d = 0.0;
      for (size_t i = 0; i < 20; ++i)
        d += f.right_vectors(j, static_cast<Eigen::Index>(i)) *
             oracle.v[i][static_cast<size_t>(j)];
      CHECK(std::abs(std::abs(d) - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("the convergence flag tracks the power iterations", "[lsa]") {
  // Well-separated spectrum: diag(4^0, 4^-1, ..., 4^-11).
  oracles::Matrix a(12, std::vector<double>(12, 0.0));
  for (size_t j = 0; j < 12; ++j) a[j][j] = std::pow(4.0, -static_cast<double>(j));
  const auto rows = dense_rows_to_sparse(a);
  CHECK_FALSE(truncated_svd(rows, 3, 1).converged);  // nothing to compare yet
  CHECK(truncated_svd(rows, 3, 30).converged);
}

TEST_CASE("reconstruction error is near the optimal truncation", "[lsa]") {
  Rng rng(7);
  const auto a = random_matrix(rng, 40, 15);
  const auto f = truncated_svd(dense_rows_to_sparse(a), 4, 20);
  const auto oracle = oracles::dense_svd(a);
  const double best = oracles::tail_residual(oracle.singular_values, 4);
  CHECK(reconstruction_error(a, f) <= 1.05 * best);
}

TEST_CASE("more rank never raises reconstruction error", "[lsa]") {
  Rng rng(8);
  const auto a = random_matrix(rng, 30, 10);
  const auto rows = dense_rows_to_sparse(a);
  double prev = std::numeric_limits<double>::infinity();
  for (int32_t k : {1, 3, 5, 8}) {
    const double err = reconstruction_error(a, truncated_svd(rows, k, 20));
    CHECK(err <= prev + 1e-9);
    prev = err;
  }
}

TEST_CASE("sign convention pins the largest component positive", "[lsa]") {
  Rng rng(55);
  const auto a = random_matrix(rng, 25, 10);
  const auto f = truncated_svd(dense_rows_to_sparse(a), 3, 20);
  for (int32_t j = 0; j < f.k; ++j) {
    Eigen::Index arg = 0;
    f.right_vectors.row(j).cwiseAbs().maxCoeff(&arg);
    CHECK(f.right_vectors(j, arg) > 0.0);
  }
}

TEST_CASE("projection is linear and consistent with training rows", "[lsa]") {
  Rng rng(66);
  const auto a = random_matrix(rng, 30, 12);
  const auto rows = dense_rows_to_sparse(a);
  const auto f = truncated_svd(rows, 4, 25);

  SECTION("zero maps to zero") {
    SparseVector zero;
    zero.dim = 12;
    const auto p = project(f, zero);
    for (double v : p) CHECK(v == 0.0);
  }

  SECTION("training rows reproduce their stored reduced vectors") {
    for (size_t i = 0; i < rows.size(); ++i) {
      const auto p = project(f, rows[i]);
      for (int32_t j = 0; j < f.k; ++j)
        CHECK(std::abs(p[static_cast<size_t>(j)] -
                       f.doc_vectors(static_cast<Eigen::Index>(i), j)) < 1e-6);
    }
  }

  SECTION("linearity") {
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> x(12), y(12);
      for (auto& v : x) v = rng.normal();
      for (auto& v : y) v = rng.normal();
      const double scale = rng.uniform(-2.0, 2.0);
      std::vector<double> combo(12);
      for (size_t i = 0; i < 12; ++i) combo[i] = scale * x[i] + y[i];
      const auto px = project(f, SparseVector::from_dense(x));
      const auto py = project(f, SparseVector::from_dense(y));
      const auto pc = project(f, SparseVector::from_dense(combo));
      for (size_t j = 0; j < 4; ++j)
        CHECK(std::abs(pc[j] - (scale * px[j] + py[j])) < 1e-9);
    }
  }

  SECTION("dim mismatch") {
    SparseVector wrong;
    wrong.dim = 5;
    REQUIRE_THROWS_AS(project(f, wrong), ParamError);
  }
}

TEST_CASE("parameter validation", "[lsa]") {
  Rng rng(1);
  const auto rows = dense_rows_to_sparse(random_matrix(rng, 6, 4));
  REQUIRE_THROWS_AS(truncated_svd(rows, 0, 5), ParamError);
  REQUIRE_THROWS_AS(truncated_svd(rows, 4, 5), ParamError);  // k >= dim
  const auto two_rows = dense_rows_to_sparse(random_matrix(rng, 2, 8));
  REQUIRE_THROWS_AS(truncated_svd(two_rows, 5, 5), ParamError);  // k > docs
  REQUIRE_THROWS_AS(truncated_svd(rows, 2, -1), ParamError);
}

TEST_CASE("factors checkpoint round-trips", "[lsa]") {
  Rng rng(9);
  const auto a = random_matrix(rng, 20, 8);
  const auto f = truncated_svd(dense_rows_to_sparse(a), 3, 15);
  const auto path = std::filesystem::temp_directory_path() / "docsim_factors.bin";
  save_factors(f, path);
  const auto g = load_factors(path);
  CHECK(g.k == f.k);
  CHECK(g.dim == f.dim);
  for (size_t j = 0; j < f.singular_values.size(); ++j)
    CHECK(g.singular_values[j] == f.singular_values[j]);
  CHECK(g.right_vectors == f.right_vectors);
  std::filesystem::remove(path);
}
