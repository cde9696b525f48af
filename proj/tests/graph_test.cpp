#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <filesystem>

#include "specmesh/graph/laplacian.hpp"
#include "specmesh/graph/mesh.hpp"
#include "specmesh/graph/spectral_oracle.hpp"
#include "specmesh/graph/spm_io.hpp"
#include "test_support.hpp"

using namespace specmesh;

namespace {

SparseMatrix<double> triangle_graph() { return build_adjacency({{0, 1, 2}}, 3).cast<double>(); }

SparseMatrix<double> path_graph(std::size_t n) {
  std::vector<Triplet<double>> t;
  for (std::uint32_t i = 0; i + 1 < n; ++i) {
    t.push_back({i, i + 1, 1.0});
    t.push_back({i + 1, i, 1.0});
  }
  return SparseMatrix<double>::from_triplets(n, n, std::move(t));
}

double dense_max_eigenvalue(const SparseMatrix<double>& m) { return dense_spectrum(m).eigenvalues.maxCoeff(); }

}  // namespace

TEST(BuildAdjacency, SingleTriangle) {
  auto a = build_adjacency({{0, 1, 2}}, 3);
  EXPECT_EQ(a.nnz(), 6u);
  for (auto [i, j] : {std::pair{0, 1}, {1, 0}, {0, 2}, {2, 0}, {1, 2}, {2, 1}}) EXPECT_EQ(a.at(i, j), 1.0);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(a.at(i, i), 0.0);
}

TEST(BuildAdjacency, NoFacesIsZero) {
  auto a = build_adjacency({}, 2);
  EXPECT_EQ(a.rows(), 2u);
  EXPECT_EQ(a.nnz(), 0u);
}

TEST(BuildAdjacency, SharedEdgeDeduplicated) {
  auto a = build_adjacency({{0, 1, 2}, {1, 2, 3}}, 4);
  EXPECT_EQ(a.at(1, 2), 1.0);
  EXPECT_EQ(a.at(2, 1), 1.0);
  EXPECT_EQ(a.nnz(), 10u);  // 5 undirected edges
  EXPECT_EQ(a.at(0, 3), 0.0);
}

TEST(BuildAdjacency, Errors) {
  EXPECT_THROW(build_adjacency({{0, 1, 5}}, 3), ValidationError);
  EXPECT_THROW(build_adjacency({{0, 1, 1}}, 3), ValidationError);
  EXPECT_THROW(build_adjacency({}, 0), ValidationError);
}

TEST(BuildLaplacian, PathGraph) {
  auto lap = build_laplacian(path_graph(3));
  const std::vector<double> expected = {1, -1, 0, -1, 2, -1, 0, -1, 1};
  EXPECT_EQ(lap.matrix.to_dense(), expected);
}

TEST(BuildLaplacian, IsolatedVertex) {
  auto lap = build_laplacian(SparseMatrix<double>(1, 1));
  EXPECT_EQ(lap.matrix.to_dense(), std::vector<double>{0.0});
  EXPECT_EQ(lap.lambda_max, 0.0);
}

TEST(BuildLaplacian, Triangle) {
  auto lap = build_laplacian(triangle_graph());
  const std::vector<double> expected = {2, -1, -1, -1, 2, -1, -1, -1, 2};
  EXPECT_EQ(lap.matrix.to_dense(), expected);
}

TEST(BuildLaplacian, RejectsAsymmetric) {
  auto a = SparseMatrix<double>::from_triplets(2, 2, {{0, 1, 1.0}});
  EXPECT_THROW(build_laplacian(a), ValidationError);
}

TEST(BuildLaplacian, InvariantsOnRandomGraphs) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(49);
    auto adj = test::random_connected_graph(n, n, rng);
    auto lap = build_laplacian(adj);
    EXPECT_TRUE(lap.matrix.is_symmetric());
    auto sums = lap.matrix.row_sums();
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_NEAR(sums[i], 0.0, 1e-9);
      double deg = 0;
      for (std::size_t k = adj.row_begin(i); k < adj.row_end(i); ++k) deg += adj.values()[k];
      EXPECT_EQ(lap.matrix.at(i, i), deg);
    }
  }
}

TEST(MaxEigenvalue, MatchesDenseOracle) {
  // Dense spectra: P3 -> {0, 1, 3}, K3 -> {0, 3, 3}.
  auto p3 = build_laplacian(path_graph(3));
  auto k3 = build_laplacian(triangle_graph());
  EXPECT_NEAR(dense_max_eigenvalue(p3.matrix), 3.0, 1e-12);
  EXPECT_NEAR(dense_max_eigenvalue(k3.matrix), 3.0, 1e-12);
  EXPECT_NEAR(max_eigenvalue(p3.matrix, 1e-6, 1000), 3.0, 1e-6);
  EXPECT_NEAR(max_eigenvalue(k3.matrix, 1e-6, 1000), 3.0, 1e-6);
}

TEST(MaxEigenvalue, ZeroMatrixReportsZero) { EXPECT_EQ(max_eigenvalue(SparseMatrix<double>(1, 1)), 0.0); }

TEST(MaxEigenvalue, RejectsNonFinite) {
  auto m = SparseMatrix<double>::from_triplets(1, 1, {{0, 0, std::nan("")}});
  EXPECT_THROW(max_eigenvalue(m), NumericError);
}

TEST(MaxEigenvalue, GershgorinFallbackWhenIterationStalls) {
  Rng rng(3);
  auto lap = build_laplacian(test::random_connected_graph(40, 60, rng));
  std::size_t max_degree = 0;
  for (std::size_t i = 0; i < 40; ++i) max_degree = std::max<std::size_t>(max_degree, static_cast<std::size_t>(lap.matrix.at(i, i)));
  EXPECT_EQ(max_eigenvalue(lap.matrix, 1e-6, 1), 2.0 * static_cast<double>(max_degree));
}

TEST(MaxEigenvalue, RandomGraphsWithinTolerance) {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 3 + rng.below(48);
    auto lap = build_laplacian(test::random_connected_graph(n, n / 2, rng));
    const double exact = dense_max_eigenvalue(lap.matrix);
    const double est = lap.lambda_max;
    // Either converged to the top eigenvalue or fell back to an upper bound.
    EXPECT_GE(est, exact * (1 - 1e-6));
    if (est < exact + 1e-3) EXPECT_LE(std::abs(est - exact) / std::max(exact, 1.0), 1e-6);
  }
}

TEST(RescaleLaplacian, PathGraph) {
  Laplacian lap{build_laplacian(path_graph(3)).matrix, 3.0};
  auto lhat = rescale_laplacian(lap).to_dense();
  const std::vector<double> expected = {-1.0 / 3, -2.0 / 3, 0, -2.0 / 3, 1.0 / 3, -2.0 / 3, 0, -2.0 / 3, -1.0 / 3};
  for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(lhat[i], expected[i], 1e-15);
}

TEST(RescaleLaplacian, Triangle) {
  Laplacian lap{build_laplacian(triangle_graph()).matrix, 3.0};
  auto lhat = rescale_laplacian(lap);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(lhat.at(i, j), i == j ? 1.0 / 3 : -2.0 / 3, 1e-15);
}

TEST(RescaleLaplacian, DegenerateGraphRejected) {
  Laplacian lap{SparseMatrix<double>(1, 1), 0.0};
  EXPECT_THROW(rescale_laplacian(lap), ValidationError);
}

TEST(RescaleLaplacian, SpectralRadiusBoundedWithExactLambda) {
  Rng rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + rng.below(49);
    auto lap = build_laplacian(test::random_connected_graph(n, n, rng));
    lap.lambda_max = dense_max_eigenvalue(lap.matrix);
    auto spec = dense_spectrum(rescale_laplacian(lap));
    EXPECT_LE(spec.eigenvalues.cwiseAbs().maxCoeff(), 1.0 + 1e-9);
  }
}

TEST(DenseOracle, IdentityAndFirstOrder) {
  Rng rng(23);
  auto lap = build_laplacian(test::random_connected_graph(20, 15, rng));
  auto x = test::random_tensor<double>(Shape{20, 3}, rng);
  EXPECT_LE(max_abs_diff(dense_spectral_filter_oracle(lap, {1.0, 0.0, 0.0}, x), x), 1e-12);

  auto lhat = rescale_laplacian(lap);
  Tensor<double> lx(Shape{20, 3});
  lhat.multiply(x.data(), 3, lx.data());
  EXPECT_LE(max_abs_diff(dense_spectral_filter_oracle(lap, {0.0, 1.0}, x), lx), 1e-12);
}

TEST(DenseOracle, SizeGuard) {
  auto lap = build_laplacian(path_graph(kDenseOracleMaxVertices + 1));
  Tensor<double> x(Shape{kDenseOracleMaxVertices + 1, 1});
  EXPECT_THROW(dense_spectral_filter_oracle(lap, {1.0}, x), ValidationError);
}

TEST(GraphFourier, RoundTripAndNorm) {
  Rng rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng.below(49);
    auto lap = build_laplacian(test::random_connected_graph(n, n, rng));
    auto spec = dense_spectrum(lap.matrix);
    auto x = test::random_tensor<double>(Shape{n, 3}, rng);
    auto xhat = graph_fourier(x, spec.eigenvectors);
    EXPECT_LE(max_abs_diff(inverse_graph_fourier(xhat, spec.eigenvectors), x), 1e-9);
    double a = 0, b = 0;
    for (double v : x.values()) a += v * v;
    for (double v : xhat.values()) b += v * v;
    EXPECT_NEAR(std::sqrt(a), std::sqrt(b), 1e-9);
  }
}

TEST(GraphFourier, EigenvectorMapsToBasisVector) {
  auto lap = build_laplacian(path_graph(6));
  auto spec = dense_spectrum(lap.matrix);
  Tensor<double> u0(Shape{6, 1});
  for (std::size_t i = 0; i < 6; ++i) u0[i] = spec.eigenvectors(static_cast<Eigen::Index>(i), 0);
  auto xhat = graph_fourier(u0, spec.eigenvectors);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(xhat[i], i == 0 ? 1.0 : 0.0, 1e-12);
  EXPECT_THROW(graph_fourier(Tensor<double>(Shape{5, 1}), spec.eigenvectors), ValidationError);
}

TEST(MeshIo, OffRoundTrip) {
  Mesh m({{0, 0, 0}, {1, 0, 0}, {0, 1, 0.125}, {1, 1, -3.5e-7}}, {{0, 1, 2}, {1, 3, 2}});
  const auto path = (std::filesystem::temp_directory_path() / "specmesh_graph_test.off").string();
  write_off(m, path);
  EXPECT_EQ(read_off(path), m);
  EXPECT_TRUE(m.is_edge_connected());
}

TEST(MeshIo, RejectsNonFiniteVertices) {
  EXPECT_THROW(Mesh({{0, 0, std::nan("")}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}}), ValidationError);
}

TEST(SpmIo, RoundTripAndBadMagic) {
  Rng rng(31);
  auto a = test::random_connected_graph(30, 20, rng);
  auto bytes = encode_spm1(a);
  EXPECT_EQ(bytes.size(), 4 + 4 + 4 + 8 + 16 * a.nnz());
  EXPECT_EQ(decode_spm1(bytes), a);
  bytes[0] = 'X';
  EXPECT_THROW(decode_spm1(bytes), FormatError);
  bytes[0] = 'S';
  bytes.pop_back();
  EXPECT_THROW(decode_spm1(bytes), FormatError);
}
