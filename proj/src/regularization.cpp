#include "mvtc/regularization.hpp"

#include "mvtc/csv.hpp"
#include "mvtc/errors.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace mvtc {

Matrix laplacian(const Matrix& adjacency) {
  if (adjacency.rows() != adjacency.cols()) throw ArgumentError("adjacency must be square");
  if (!adjacency.allFinite()) throw ArgumentError("adjacency must be finite");
  if (adjacency.size() > 0 && adjacency.minCoeff() < 0.0) {
    throw ArgumentError("adjacency weights must be nonnegative");
  }
  if (!(adjacency - adjacency.transpose()).isZero(0.0)) {
    throw ArgumentError("adjacency must be symmetric");
  }
  if (!adjacency.diagonal().isZero(0.0)) throw ArgumentError("adjacency diagonal must be zero");
  Matrix L = -adjacency;
  L.diagonal() = adjacency.rowwise().sum();
  return L;
}

LocationGraph::LocationGraph(std::size_t n)
    : adjacency_(Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n))),
      laplacian_(adjacency_) {}

LocationGraph LocationGraph::from_edges(std::size_t n, const std::vector<Edge>& edges) {
  LocationGraph g(n);
  for (const auto& e : edges) {
    if (e.u >= n || e.v >= n) {
      throw ArgumentError("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                          ") out of range for " + std::to_string(n) + " locations");
    }
    if (!std::isfinite(e.weight) || e.weight < 0.0) {
      throw ArgumentError("edge weights must be nonnegative");
    }
    if (e.u == e.v) continue;
    const auto u = static_cast<Eigen::Index>(e.u);
    const auto v = static_cast<Eigen::Index>(e.v);
    g.adjacency_(u, v) += e.weight;
    g.adjacency_(v, u) += e.weight;
  }
  g.laplacian_ = mvtc::laplacian(g.adjacency_);
  return g;
}

LocationGraph LocationGraph::load_csv(const std::string& path, std::size_t n) {
  CsvTable table = read_csv(path, {"u", "v", "weight"}, /*header_optional=*/true);
  std::vector<Edge> edges;
  edges.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.lines[r];
    edges.push_back({parse_index(row[0], line), parse_index(row[1], line),
                     parse_real(row[2], line)});
  }
  return from_edges(n, edges);
}

LocationGraph LocationGraph::permuted(const std::vector<std::size_t>& perm) const {
  const auto n = adjacency_.rows();
  if (static_cast<Eigen::Index>(perm.size()) != n) throw ArgumentError("permutation size mismatch");
  LocationGraph g(static_cast<std::size_t>(n));
  for (Eigen::Index u = 0; u < n; ++u)
    for (Eigen::Index v = 0; v < n; ++v)
      g.adjacency_(static_cast<Eigen::Index>(perm[u]), static_cast<Eigen::Index>(perm[v])) =
          adjacency_(u, v);
  g.laplacian_ = mvtc::laplacian(g.adjacency_);
  return g;
}

// ---------------------------------------------------------------------------

SmoothnessOperator::SmoothnessOperator(std::size_t n) : n_(n) {
  if (n == 0) throw ArgumentError("smoothness operator needs n >= 1");
}

Matrix SmoothnessOperator::gamma() const {
  const auto n = static_cast<Eigen::Index>(n_);
  Matrix g = Matrix::Zero(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    g(r, r) = 2.0;
    if (r > 0) g(r, r - 1) = -1.0;
    if (r + 1 < n) g(r, r + 1) = -1.0;
  }
  return g;
}

Matrix SmoothnessOperator::apply(const Matrix& m) const {
  if (static_cast<std::size_t>(m.rows()) != n_) {
    throw ArgumentError("smoothness operator size does not match matrix rows");
  }
  const auto n = m.rows();
  Matrix out = 2.0 * m;
  if (n > 1) {
    out.topRows(n - 1) -= m.bottomRows(n - 1);
    out.bottomRows(n - 1) -= m.topRows(n - 1);
  }
  return out;
}

double SmoothnessOperator::normal_largest_eig() const {
  const double lam = 2.0 + 2.0 * std::cos(std::numbers::pi / static_cast<double>(n_ + 1));
  return lam * lam;
}

RegTerm graph_reg(const Matrix& A, const Matrix& L, double rho_A) {
  if (L.rows() != L.cols() || L.rows() != A.rows()) {
    throw ArgumentError("Laplacian size does not match location factor rows");
  }
  const Matrix LA = L * A;
  return {rho_A * (A.transpose() * LA).trace(), 2.0 * rho_A * LA};
}

RegTerm smooth_reg(const Matrix& M, const SmoothnessOperator& gamma, double rho) {
  const Matrix GM = gamma.apply(M);
  return {rho * GM.squaredNorm(), 2.0 * rho * gamma.apply(GM)};
}

// ---------------------------------------------------------------------------

namespace {

struct PowerResult {
  double lambda = 0.0;
  bool converged = true;
};

PowerResult power_run(const Matrix& m, Vector v, const EigOptions& o) {
  const double vn = v.norm();
  if (vn == 0.0) return {};
  v /= vn;
  double lambda = v.dot(m * v);
  for (std::size_t it = 0; it < o.max_iters; ++it) {
    Vector w = m * v;
    const double wn = w.norm();
    if (wn == 0.0) return {};  // start lies in the null space
    v = w / wn;
    const double next = v.dot(m * v);
    // Stop well inside the requested tolerance: the Rayleigh quotient
    // approaches lambda_max from below.
    if (std::abs(next - lambda) <= 1e-3 * o.tol * std::abs(next)) return {next, true};
    lambda = next;
  }
  return {lambda, false};
}

}  // namespace

double largest_eig(const Matrix& sym, const EigOptions& options, bool* converged) {
  if (sym.rows() != sym.cols()) throw ArgumentError("largest_eig needs a square matrix");
  if (!sym.allFinite()) throw ArgumentError("largest_eig: non-finite entries");
  if (converged) *converged = true;
  const auto n = sym.rows();
  if (n == 0) return 0.0;
  if (n == 1) return sym(0, 0);
  const PowerResult ones = power_run(sym, Vector::Ones(n), options);
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal;
  Vector r(n);
  for (Eigen::Index i = 0; i < n; ++i) r(i) = normal(rng);
  const PowerResult random = power_run(sym, r, options);
  if (converged) *converged = ones.converged && random.converged;
  return std::max(ones.lambda, random.lambda);
}

double spectral_upper_bound(const Matrix& sym, const EigOptions& options) {
  bool converged = false;
  const double estimate = largest_eig(sym, options, &converged);
  if (converged) return (1.0 + options.tol) * estimate;
  return sym.cwiseAbs().rowwise().sum().maxCoeff();  // Gershgorin
}

}  // namespace mvtc
