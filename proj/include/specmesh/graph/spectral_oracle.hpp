#pragma once

// Dense eigendecomposition route for small graphs. Used to validate the
// sparse Chebyshev recursion; never on the training path.

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "specmesh/core/error.hpp"
#include "specmesh/core/tensor.hpp"
#include "specmesh/graph/laplacian.hpp"

namespace specmesh {

inline constexpr std::size_t kDenseOracleMaxVertices = 512;

struct DenseSpectrum {
  Eigen::VectorXd eigenvalues;   // ascending
  Eigen::MatrixXd eigenvectors;  // orthonormal columns
};

inline Eigen::MatrixXd to_dense_matrix(const SparseMatrix<double>& m) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
  for (const auto& t : m.triplets()) d(t.row, t.col) = t.value;
  return d;
}

inline DenseSpectrum dense_spectrum(const SparseMatrix<double>& symmetric) {
  require(symmetric.rows() <= kDenseOracleMaxVertices,
          "dense spectrum: " + std::to_string(symmetric.rows()) + " vertices exceeds the oracle guard of " +
              std::to_string(kDenseOracleMaxVertices));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(to_dense_matrix(symmetric));
  if (solver.info() != Eigen::Success) throw NumericError("dense spectrum: eigensolver failed");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

/// Chebyshev polynomial T_k evaluated in closed form.
inline double chebyshev_closed_form(int k, double x) {
  if (std::abs(x) <= 1.0) return std::cos(k * std::acos(x));
  const double v = std::cosh(k * std::acosh(std::abs(x)));
  return (x < 0 && (k % 2 == 1)) ? -v : v;
}

/// y = U g(Lambda_hat) U^T x with g(l) = sum_k theta_k T_k(l), where
/// Lambda_hat are the eigenvalues of 2 L / lambda_max - I built densely from
/// the Laplacian. x is N x F; every column is filtered by the same g.
inline Tensor<double> dense_spectral_filter_oracle(const Laplacian& lap, const std::vector<double>& theta,
                                                   const Tensor<double>& x) {
  const std::size_t n = lap.matrix.rows();
  require(n <= kDenseOracleMaxVertices, "dense_spectral_filter_oracle: N=" + std::to_string(n) +
                                            " exceeds guard " + std::to_string(kDenseOracleMaxVertices));
  require(x.rank() == 2 && x.dim(0) == n, "dense_spectral_filter_oracle: x must be N x F");
  require(lap.lambda_max > 0.0, "dense_spectral_filter_oracle: degenerate graph");
  const Eigen::Index N = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd lhat = 2.0 * to_dense_matrix(lap.matrix) / lap.lambda_max - Eigen::MatrixXd::Identity(N, N);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lhat);
  if (solver.info() != Eigen::Success) throw NumericError("dense_spectral_filter_oracle: eigensolver failed");
  Eigen::VectorXd g(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < theta.size(); ++k) s += theta[k] * chebyshev_closed_form(static_cast<int>(k), solver.eigenvalues()(i));
    g(i) = s;
  }
  const Eigen::Index F = static_cast<Eigen::Index>(x.dim(1));
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> xm(x.data(), N, F);
  const Eigen::MatrixXd& U = solver.eigenvectors();
  Eigen::MatrixXd y = U * (g.asDiagonal() * (U.transpose() * xm));
  Tensor<double> out(Shape{n, x.dim(1)});
  for (Eigen::Index i = 0; i < N; ++i)
    for (Eigen::Index f = 0; f < F; ++f) out.at(static_cast<std::size_t>(i), static_cast<std::size_t>(f)) = y(i, f);
  return out;
}

namespace detail {
inline Tensor<double> apply_basis(const Eigen::MatrixXd& M, const Tensor<double>& x) {
  require(x.rank() == 2 && static_cast<Eigen::Index>(x.dim(0)) == M.cols(), "graph_fourier: shape mismatch");
  const Eigen::Index F = static_cast<Eigen::Index>(x.dim(1));
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> xm(x.data(), M.cols(), F);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> y = M * xm;
  return Tensor<double>(Shape{static_cast<std::size_t>(M.rows()), x.dim(1)},
                        std::vector<double>(y.data(), y.data() + y.size()));
}
}  // namespace detail

/// x_hat = U^T x.
inline Tensor<double> graph_fourier(const Tensor<double>& x, const Eigen::MatrixXd& U) {
  return detail::apply_basis(U.transpose(), x);
}

/// x = U x_hat.
inline Tensor<double> inverse_graph_fourier(const Tensor<double>& x_hat, const Eigen::MatrixXd& U) {
  return detail::apply_basis(U, x_hat);
}

}  // namespace specmesh
