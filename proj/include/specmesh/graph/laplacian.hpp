#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "specmesh/core/error.hpp"
#include "specmesh/core/rng.hpp"
#include "specmesh/graph/sparse_matrix.hpp"

namespace specmesh {

/// Combinatorial Laplacian L = D - A with its largest-eigenvalue estimate.
struct Laplacian {
  SparseMatrix<double> matrix;
  double lambda_max = 0.0;
};

/// Power iteration on a symmetric positive semi-definite matrix.
///
/// The start vector comes from a fixed-seed generator. Convergence is declared
/// once the residual |Lx - rho x| of the Rayleigh quotient rho drops below
/// tol * max(rho, 1), or once the extrapolated remaining error of the
/// Rayleigh quotient sequence does.
/// If that does not happen within max_iters, the Gershgorin bound
/// max_i sum_j |L_ij| is returned instead (2 * max degree for a Laplacian).
inline double max_eigenvalue(const SparseMatrix<double>& L, double tol = 1e-6, int max_iters = 1000) {
  require(L.rows() == L.cols(), "max_eigenvalue: matrix is not square");
  if (!L.all_finite()) throw NumericError("max_eigenvalue: matrix has non-finite entries");
  const std::size_t n = L.rows();

  double gershgorin = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t k = L.row_begin(r); k < L.row_end(r); ++k) s += std::abs(L.values()[k]);
    gershgorin = std::max(gershgorin, s);
  }
  if (gershgorin == 0.0) return 0.0;

  Rng rng(0x1a9ac1a5ULL);
  std::vector<double> x(n), y(n);
  for (double& v : x) v = rng.uniform(-1.0, 1.0);
  auto normalize = [](std::vector<double>& v) {
    double s = 0.0;
    for (double a : v) s += a * a;
    s = std::sqrt(s);
    for (double& a : v) a /= s;
    return s;
  };
  normalize(x);

  // Rayleigh quotients rise monotonically towards lambda_max with a roughly
  // geometric error e_k ~ c q^k. With d_k = rho_k - rho_{k-1} and
  // q ~ d_k / d_{k-1}, the remaining error is about d_k q / (1 - q).
  double prev_rq = 0.0, prev_step = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    L.multiply(x.data(), 1, y.data());
    double rq = 0.0;
    for (std::size_t i = 0; i < n; ++i) rq += x[i] * y[i];
    double res = 0.0;
    for (std::size_t i = 0; i < n; ++i) res += (y[i] - rq * x[i]) * (y[i] - rq * x[i]);
    const double scale = tol * std::max(std::abs(rq), 1.0);
    if (std::sqrt(res) <= scale) return rq;
    if (it >= 2) {
      const double step = rq - prev_rq;
      if (step >= 0.0 && prev_step > 0.0) {
        const double q = step / prev_step;
        if (q < 1.0 && step * q / (1.0 - q) <= 0.1 * scale) return rq;
      }
      prev_step = step;
    } else if (it == 1) {
      prev_step = rq - prev_rq;
    }
    prev_rq = rq;
    if (normalize(y) == 0.0) break;
    std::swap(x, y);
  }
  return gershgorin;
}

inline Laplacian build_laplacian(const SparseMatrix<double>& adjacency) {
  const std::size_t n = adjacency.rows();
  require(n == adjacency.cols(), "build_laplacian: adjacency is not square");
  require(adjacency.is_symmetric(), "build_laplacian: adjacency is not symmetric");
  std::vector<Triplet<double>> trip;
  trip.reserve(adjacency.nnz() + n);
  for (std::size_t r = 0; r < n; ++r) {
    double degree = 0.0;
    for (std::size_t k = adjacency.row_begin(r); k < adjacency.row_end(r); ++k) {
      const std::uint32_t c = adjacency.col_idx()[k];
      const double a = adjacency.values()[k];
      require(c != r || a == 0.0, "build_laplacian: adjacency has a nonzero diagonal");
      require(a == 0.0 || a == 1.0, "build_laplacian: adjacency must be 0/1");
      if (c == r || a == 0.0) continue;
      degree += a;
      trip.push_back({static_cast<std::uint32_t>(r), c, -a});
    }
    trip.push_back({static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(r), degree});
  }
  Laplacian lap;
  lap.matrix = SparseMatrix<double>::from_triplets(n, n, std::move(trip));
  lap.lambda_max = max_eigenvalue(lap.matrix);
  return lap;
}

/// L_hat = 2 L / lambda_max - I, whose spectrum lies in [-1, 1].
inline SparseMatrix<double> rescale_laplacian(const Laplacian& lap) {
  if (!(lap.lambda_max > 0.0)) throw ValidationError("rescale_laplacian: degenerate graph (lambda_max <= 0)");
  const auto& L = lap.matrix;
  const std::size_t n = L.rows();
  std::vector<Triplet<double>> trip;
  trip.reserve(L.nnz() + n);
  for (std::size_t r = 0; r < n; ++r) {
    bool diag = false;
    for (std::size_t k = L.row_begin(r); k < L.row_end(r); ++k) {
      const std::uint32_t c = L.col_idx()[k];
      double v = 2.0 * L.values()[k] / lap.lambda_max;
      if (c == r) {
        v -= 1.0;
        diag = true;
      }
      trip.push_back({static_cast<std::uint32_t>(r), c, v});
    }
    if (!diag) trip.push_back({static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(r), -1.0});
  }
  return SparseMatrix<double>::from_triplets(n, n, std::move(trip));
}

}  // namespace specmesh
