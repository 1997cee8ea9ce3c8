#pragma once

#include "mvtc/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mvtc {

struct Edge {
  std::size_t u = 0, v = 0;
  double weight = 1.0;
};

/// Weighted undirected location graph with Laplacian L = Deg - W.
class LocationGraph {
 public:
  /// Graph on n nodes with no edges (zero Laplacian).
  explicit LocationGraph(std::size_t n = 0);
  /// Symmetrizes: an edge (u, v, w) contributes w to both W(u,v) and W(v,u);
  /// repeated edges accumulate. Self loops are ignored.
  static LocationGraph from_edges(std::size_t n, const std::vector<Edge>& edges);
  /// Reads a `u,v,weight` CSV edge list (header optional).
  static LocationGraph load_csv(const std::string& path, std::size_t n);

  std::size_t size() const { return static_cast<std::size_t>(laplacian_.rows()); }
  const Matrix& adjacency() const { return adjacency_; }
  const Matrix& laplacian() const { return laplacian_; }
  bool empty() const { return adjacency_.size() == 0 || adjacency_.isZero(0.0); }

  /// Same graph with node p -> perm[p].
  LocationGraph permuted(const std::vector<std::size_t>& perm) const;

 private:
  Matrix adjacency_;
  Matrix laplacian_;
};

/// L = Deg - W. Requires a square, symmetric, nonnegative adjacency with zero
/// diagonal.
Matrix laplacian(const Matrix& adjacency);

/// Square n x n second-difference operator: 2 on the diagonal, -1 on the
/// first sub/super diagonals, zero elsewhere.
class SmoothnessOperator {
 public:
  explicit SmoothnessOperator(std::size_t n);

  std::size_t size() const { return n_; }
  Matrix gamma() const;
  /// Gamma * M, by stencil.
  Matrix apply(const Matrix& m) const;
  /// Gamma^T Gamma * M.
  Matrix apply_normal(const Matrix& m) const { return apply(apply(m)); }
  /// Largest eigenvalue of Gamma^T Gamma: (2 + 2 cos(pi / (n + 1)))^2.
  double normal_largest_eig() const;

 private:
  std::size_t n_;
};

struct RegTerm {
  double value = 0.0;
  Matrix gradient;
};

/// rho_A * tr(A^T L A); gradient 2 rho_A L A.
RegTerm graph_reg(const Matrix& A, const Matrix& L, double rho_A);

/// rho * ||Gamma M||_F^2; gradient 2 rho Gamma^T Gamma M.
RegTerm smooth_reg(const Matrix& M, const SmoothnessOperator& gamma, double rho);

struct EigOptions {
  double tol = 1e-6;
  std::size_t max_iters = 10000;
  std::uint64_t seed = 0x5eed;
};

/// Power-iteration estimate of the largest eigenvalue of a symmetric PSD
/// matrix. Runs from the all-ones vector and from a seeded random vector
/// (covering starts that are orthogonal to, or exact eigenvectors other than,
/// the top eigenvector) and returns the larger Rayleigh quotient.
/// `converged`, when given, reports whether both runs met the tolerance
/// within max_iters.
double largest_eig(const Matrix& sym, const EigOptions& options = {}, bool* converged = nullptr);
inline double largest_eig(const Matrix& sym, double tol) {
  EigOptions o;
  o.tol = tol;
  return largest_eig(sym, o);
}

/// Step-size denominator: (1 + tol) * largest_eig when power iteration
/// converged, otherwise the Gershgorin row-sum bound.
double spectral_upper_bound(const Matrix& sym, const EigOptions& options = {});

}  // namespace mvtc
