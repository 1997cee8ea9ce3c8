#include "doctest.h"
#include "support.hpp"

#include "mvtc/errors.hpp"
#include "mvtc/regularization.hpp"

using namespace mvtc;
using namespace mvtc::testing;

TEST_CASE("laplacian small cases") {
  CHECK(LocationGraph(3).laplacian().isZero(0.0));
  const LocationGraph g = LocationGraph::from_edges(2, {{0, 1, 1.0}});
  Matrix want(2, 2);
  want << 1, -1, -1, 1;
  CHECK(g.laplacian() == want);
}

TEST_CASE("laplacian rejects asymmetric or negative adjacency") {
  Matrix w(2, 2);
  w << 0, 1, 0, 0;
  CHECK_THROWS_AS(laplacian(w), ArgumentError);
  w << 0, -1, -1, 0;
  CHECK_THROWS_AS(laplacian(w), ArgumentError);
}

TEST_CASE("laplacian quadratic form is the edgewise sum") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = uniform_int(rng, 2, 9);
    std::vector<Edge> edges;
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = u + 1; v < n; ++v)
        if (uniform(rng) < 0.4) edges.push_back({u, v, uniform(rng, 0.1, 3.0)});
    const LocationGraph g = LocationGraph::from_edges(n, edges);
    const Matrix& L = g.laplacian();
    CHECK((L - L.transpose()).norm() == 0.0);
    CHECK(L.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-12);
    const Vector x = random_matrix(rng, n, 1, -1, 1);
    double want = 0.0;
    for (const auto& e : edges) want += e.weight * (x(static_cast<Eigen::Index>(e.u)) - x(static_cast<Eigen::Index>(e.v))) *
                                        (x(static_cast<Eigen::Index>(e.u)) - x(static_cast<Eigen::Index>(e.v)));
    CHECK(std::abs(x.dot(L * x) - want) <= 1e-12 * std::max(1.0, want));
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(L).eigenvalues().minCoeff() >= -1e-12);
  }
}

TEST_CASE("graph regularizer") {
  Rng rng(32);
  const Matrix A = random_matrix(rng, 5, 2);
  const RegTerm zero = graph_reg(A, Matrix::Zero(5, 5), 0.3);
  CHECK(zero.value == 0.0);
  CHECK(zero.gradient.isZero(0.0));

  const LocationGraph g = random_graph(rng, 5);
  Matrix constant_rows(5, 2);
  constant_rows.rowwise() = Eigen::RowVector2d(0.7, 1.3);
  CHECK(std::abs(graph_reg(constant_rows, g.laplacian(), 0.5).value) <= 1e-14);

  const double rho = 0.37;
  const RegTerm r = graph_reg(A, g.laplacian(), rho);
  const Matrix fd = finite_difference([&](const Matrix& M) { return graph_reg(M, g.laplacian(), rho).value; }, A);
  CHECK(rel_err(r.gradient, fd) <= 1e-6);
  CHECK(r.value >= 0.0);
  CHECK_THROWS_AS(graph_reg(A, Matrix::Zero(4, 4), rho), ArgumentError);
}

TEST_CASE("second-difference operator") {
  const SmoothnessOperator op(5);
  CHECK(op.gamma() == ref_gamma(5));
  // Interior rows annihilate constants.
  const Matrix c = Matrix::Constant(5, 1, 2.0);
  const Matrix gc = op.apply(c);
  CHECK(gc(0, 0) == 2.0);
  CHECK(gc(4, 0) == 2.0);
  CHECK(gc.block(1, 0, 3, 1).isZero(0.0));
  // Toeplitz.
  const Matrix G = op.gamma();
  for (Eigen::Index r = 1; r < 5; ++r)
    for (Eigen::Index s = 1; s < 5; ++s) CHECK(G(r, s) == G(r - 1, s - 1));
  const double top = Eigen::SelfAdjointEigenSolver<Matrix>(G.transpose() * G).eigenvalues().maxCoeff();
  CHECK(std::abs(op.normal_largest_eig() - top) <= 1e-12 * top);
}

TEST_CASE("smoothness regularizer") {
  Rng rng(33);
  const SmoothnessOperator op(6);
  Matrix constant(6, 2);
  constant.rowwise() = Eigen::RowVector2d(1.0, 2.0);
  // Only the boundary rows contribute: 2 * (1^2 + 2^2).
  CHECK(std::abs(smooth_reg(constant, op, 1.0).value - 10.0) <= 1e-12);
  const Matrix M = random_matrix(rng, 6, 2);
  const RegTerm none = smooth_reg(M, op, 0.0);
  CHECK(none.value == 0.0);
  CHECK(none.gradient.isZero(0.0));
  const RegTerm r = smooth_reg(M, op, 0.2);
  const Matrix fd = finite_difference([&](const Matrix& X) { return smooth_reg(X, op, 0.2).value; }, M);
  CHECK(rel_err(r.gradient, fd) <= 1e-6);
  CHECK_THROWS_AS(smooth_reg(random_matrix(rng, 5, 2), op, 0.2), ArgumentError);
}

TEST_CASE("largest eigenvalue") {
  CHECK(std::abs(largest_eig(Matrix::Identity(4, 4)) - 1.0) <= 1e-12);
  Matrix d = Eigen::Vector3d(1, 2, 5).asDiagonal();
  CHECK(std::abs(largest_eig(d) - 5.0) <= 1e-6 * 5.0);
  // The all-ones start is orthogonal to the top eigenvector here.
  Matrix m(2, 2);
  m << 2, -2, -2, 2;
  CHECK(std::abs(largest_eig(m) - 4.0) <= 1e-6 * 4.0);

  Rng rng(34);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix R = random_matrix(rng, 20, 20, -1, 1);
    const Matrix P = R.transpose() * R;
    const double want = Eigen::SelfAdjointEigenSolver<Matrix>(P).eigenvalues().maxCoeff();
    CHECK(std::abs(largest_eig(P) - want) <= 1e-6 * want);
    CHECK(spectral_upper_bound(P) >= want);
  }
  Matrix bad = Matrix::Identity(2, 2);
  bad(0, 1) = bad(1, 0) = std::nan("");
  CHECK_THROWS_AS(largest_eig(bad), ArgumentError);
}

TEST_CASE("graph permutation relabels the Laplacian") {
  Rng rng(35);
  const LocationGraph g = random_graph(rng, 6);
  const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  const LocationGraph h = g.permuted(perm);
  for (std::size_t u = 0; u < 6; ++u)
    for (std::size_t v = 0; v < 6; ++v)
      CHECK(h.laplacian()(static_cast<Eigen::Index>(perm[u]), static_cast<Eigen::Index>(perm[v])) ==
            doctest::Approx(g.laplacian()(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v))).epsilon(1e-14));
}
