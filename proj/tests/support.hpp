#pragma once

// Random instance generators and brute-force reference implementations.
// The references index tensors element by element and share no code with
// the kernels they check.

#include "mvtc/regularization.hpp"
#include "mvtc/solver.hpp"
#include "mvtc/tensor.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace mvtc::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::size_t uniform_int(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo = 0.0,
                            double hi = 1.0) {
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = uniform(rng, lo, hi);
  return m;
}

inline Tensor4 random_tensor(Rng& rng, Dims4 d, double lo = -1.0, double hi = 1.0) {
  Tensor4 t(d);
  for (double& v : t.values()) v = uniform(rng, lo, hi);
  return t;
}

inline Dims4 random_dims(Rng& rng, std::size_t max_extent = 4) {
  return {uniform_int(rng, 1, max_extent), uniform_int(rng, 1, max_extent),
          uniform_int(rng, 1, max_extent), uniform_int(rng, 1, max_extent)};
}

inline FactorSet random_factors(Rng& rng, Dims4 d, std::size_t F, double lo = 0.0, double hi = 1.0) {
  return {random_matrix(rng, d.I, F, lo, hi), random_matrix(rng, d.J, F, lo, hi),
          random_matrix(rng, d.K, F, lo, hi), random_matrix(rng, d.S, F, lo, hi)};
}

/// Slabs drawn missing, observed or per-entry random, so all three slab
/// states appear.
inline ObservationMask random_mask(Rng& rng, Dims4 d, double p_entry = 0.5) {
  ObservationMask m(d);
  for (std::size_t s = 0; s < d.S; ++s) {
    for (std::size_t k = 0; k < d.K; ++k) {
      const std::size_t kind = uniform_int(rng, 0, 2);
      if (kind == 1) {
        m.set_slab(k, s, true);
      } else if (kind == 2) {
        for (std::size_t j = 0; j < d.J; ++j)
          for (std::size_t i = 0; i < d.I; ++i) m.set(i, j, k, s, uniform(rng) < p_entry);
      }
    }
  }
  return m;
}

inline double rel_err(const Matrix& got, const Matrix& want) {
  const double scale = std::max(want.norm(), 1e-300);
  return (got - want).norm() / scale;
}

inline double rel_err(const Tensor4& got, const Tensor4& want) {
  double num = 0.0, den = 0.0;
  for (std::size_t n = 0; n < want.size(); ++n) {
    const double d = got.values()[n] - want.values()[n];
    num += d * d;
    den += want.values()[n] * want.values()[n];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

// Reference kernels ---------------------------------------------------------

inline std::array<std::size_t, 4> extents(const Dims4& d) { return {d.I, d.J, d.K, d.S}; }

/// Element (i, j, k, s) lands at the row of its `mode` index; the column
/// enumerates the other modes ascending with the last one fastest.
inline Matrix ref_unfold(const Tensor4& t, int mode) {
  const auto ext = extents(t.dims());
  const std::size_t n = static_cast<std::size_t>(mode - 1);
  std::size_t cols = 1;
  for (std::size_t m = 0; m < 4; ++m)
    if (m != n) cols *= ext[m];
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(ext[n]), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < ext[0]; ++i)
    for (std::size_t j = 0; j < ext[1]; ++j)
      for (std::size_t k = 0; k < ext[2]; ++k)
        for (std::size_t s = 0; s < ext[3]; ++s) {
          const std::array<std::size_t, 4> idx{i, j, k, s};
          std::size_t col = 0;
          for (std::size_t m = 0; m < 4; ++m)
            if (m != n) col = col * ext[m] + idx[m];
          out(static_cast<Eigen::Index>(idx[n]), static_cast<Eigen::Index>(col)) = t(i, j, k, s);
        }
  return out;
}

inline Matrix ref_khatri_rao(const std::vector<Matrix>& ms) {
  std::size_t rows = 1;
  for (const auto& m : ms) rows *= static_cast<std::size_t>(m.rows());
  const Eigen::Index F = ms.front().cols();
  Matrix out(static_cast<Eigen::Index>(rows), F);
  for (Eigen::Index f = 0; f < F; ++f) {
    for (std::size_t r = 0; r < rows; ++r) {
      // Decode r into one row index per input, last input fastest.
      std::size_t rest = r;
      double v = 1.0;
      for (std::size_t m = ms.size(); m-- > 0;) {
        const std::size_t n = static_cast<std::size_t>(ms[m].rows());
        v *= ms[m](static_cast<Eigen::Index>(rest % n), f);
        rest /= n;
      }
      out(static_cast<Eigen::Index>(r), f) = v;
    }
  }
  return out;
}

inline Matrix ref_mttkrp(const Tensor4& t, const FactorSet& theta, int mode) {
  const auto ext = extents(t.dims());
  const std::size_t n = static_cast<std::size_t>(mode - 1);
  const Eigen::Index F = theta.A.cols();
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(ext[n]), F);
  for (std::size_t i = 0; i < ext[0]; ++i)
    for (std::size_t j = 0; j < ext[1]; ++j)
      for (std::size_t k = 0; k < ext[2]; ++k)
        for (std::size_t s = 0; s < ext[3]; ++s) {
          const std::array<std::size_t, 4> idx{i, j, k, s};
          for (Eigen::Index f = 0; f < F; ++f) {
            double v = t(i, j, k, s);
            for (std::size_t m = 0; m < 4; ++m)
              if (m != n) v *= theta.factor(static_cast<int>(m + 1))(static_cast<Eigen::Index>(idx[m]), f);
            out(static_cast<Eigen::Index>(idx[n]), f) += v;
          }
        }
  return out;
}

inline Tensor4 ref_reconstruct(const FactorSet& th) {
  Tensor4 out(th.dims());
  const Dims4 d = th.dims();
  for (std::size_t i = 0; i < d.I; ++i)
    for (std::size_t j = 0; j < d.J; ++j)
      for (std::size_t k = 0; k < d.K; ++k)
        for (std::size_t s = 0; s < d.S; ++s) {
          double v = 0.0;
          for (Eigen::Index f = 0; f < th.A.cols(); ++f) {
            v += th.A(static_cast<Eigen::Index>(i), f) * th.B(static_cast<Eigen::Index>(j), f) *
                 th.C(static_cast<Eigen::Index>(k), f) * th.D(static_cast<Eigen::Index>(s), f);
          }
          out(i, j, k, s) = v;
        }
  return out;
}

inline Tensor4 ref_project_mask(const Tensor4& t, const ObservationMask& m, bool inside) {
  Tensor4 out(t.dims());
  const Dims4 d = t.dims();
  for (std::size_t i = 0; i < d.I; ++i)
    for (std::size_t j = 0; j < d.J; ++j)
      for (std::size_t k = 0; k < d.K; ++k)
        for (std::size_t s = 0; s < d.S; ++s)
          if (m.contains(i, j, k, s) == inside) out(i, j, k, s) = t(i, j, k, s);
  return out;
}

/// Dense second-difference matrix.
inline Matrix ref_gamma(std::size_t n) {
  Matrix g = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index r = 0; r < g.rows(); ++r) {
    g(r, r) = 2.0;
    if (r > 0) g(r, r - 1) = -1.0;
    if (r + 1 < g.rows()) g(r, r + 1) = -1.0;
  }
  return g;
}

/// Entry-by-entry objective: sum_s w_s^2 sum (Y - model)^2 plus regularizers
/// written out from their definitions.
inline double ref_objective(const CompletionProblem& p, const FactorSet& th, const Tensor4& Y) {
  const Tensor4 model = ref_reconstruct(th);
  const Dims4 d = p.dims();
  double misfit = 0.0;
  for (std::size_t s = 0; s < d.S; ++s)
    for (std::size_t k = 0; k < d.K; ++k)
      for (std::size_t j = 0; j < d.J; ++j)
        for (std::size_t i = 0; i < d.I; ++i) {
          const double r = Y(i, j, k, s) - model(i, j, k, s);
          misfit += p.weights_sq()[s] * r * r;
        }
  double reg = 0.0;
  if (p.has_graph()) {
    const Matrix& L = p.laplacian();
    for (Eigen::Index f = 0; f < th.A.cols(); ++f)
      for (Eigen::Index u = 0; u < L.rows(); ++u)
        for (Eigen::Index v = 0; v < L.cols(); ++v) reg += p.rho_A() * th.A(u, f) * L(u, v) * th.A(v, f);
  }
  reg += p.rho() * (ref_gamma(d.K) * th.C).squaredNorm();
  reg += p.rho() * (ref_gamma(d.S) * th.D).squaredNorm();
  return misfit + reg;
}

/// Central differences of f at M, entry by entry.
inline Matrix finite_difference(const std::function<double(const Matrix&)>& f, const Matrix& M,
                                double h = 1e-5) {
  Matrix g(M.rows(), M.cols());
  Matrix probe = M;
  for (Eigen::Index c = 0; c < M.cols(); ++c)
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
      probe(r, c) = M(r, c) + h;
      const double up = f(probe);
      probe(r, c) = M(r, c) - h;
      const double down = f(probe);
      probe(r, c) = M(r, c);
      g(r, c) = (up - down) / (2.0 * h);
    }
  return g;
}

/// A random connected graph: a path plus random extra edges.
inline LocationGraph random_graph(Rng& rng, std::size_t n, double p_extra = 0.3) {
  std::vector<Edge> edges;
  for (std::size_t u = 0; u + 1 < n; ++u) edges.push_back({u, u + 1, uniform(rng, 0.5, 2.0)});
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 2; v < n; ++v)
      if (uniform(rng) < p_extra) edges.push_back({u, v, uniform(rng, 0.1, 1.0)});
  return LocationGraph::from_edges(n, edges);
}

}  // namespace mvtc::testing
