#include "mvtc/solver.hpp"

#include "mvtc/errors.hpp"
#include "mvtc/kernels.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

namespace mvtc {
namespace {

using ConstMap = Eigen::Map<const Matrix>;
using MutMap = Eigen::Map<Matrix>;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

Vector weight_vector(const std::vector<double>& w) {
  return Eigen::Map<const Vector>(w.data(), idx(w.size()));
}

// X^_(:,:,k,s) = (A .* (c_k .* d_s)) B^T.
void slab_model(const FactorSet& th, std::size_t k, std::size_t s, Matrix& scratch, Matrix& out) {
  const Eigen::RowVectorXd w = th.C.row(idx(k)).cwiseProduct(th.D.row(idx(s)));
  scratch = th.A.array().rowwise() * w.array();
  out.noalias() = scratch * th.B.transpose();
}

double reg_value(const CompletionProblem& p, const FactorSet& th) {
  double v = 0.0;
  if (p.has_graph()) v += graph_reg(th.A, p.laplacian(), p.rho_A()).value;
  if (p.rho() > 0.0) {
    v += p.rho() * SmoothnessOperator(static_cast<std::size_t>(th.C.rows())).apply(th.C).squaredNorm();
    v += p.rho() * SmoothnessOperator(static_cast<std::size_t>(th.D.rows())).apply(th.D).squaredNorm();
  }
  return v;
}

void check_shapes(const CompletionProblem& p, const FactorSet& th) {
  th.check_rank();
  if (!(th.dims() == p.dims())) throw ArgumentError("factor shapes do not match the problem");
}

// Gram of the Khatri-Rao product of the other three factors (D weighted)
// and the matching MTTKRP. `projection` short-circuits modes 2..4.
void normal_terms(int mode, const CompletionProblem& p, const FactorSet& th, const Tensor4& Y,
                  const Matrix* projection, Matrix& G, Matrix& M) {
  const Vector w2 = weight_vector(p.weights_sq());
  const Matrix AtA = th.A.transpose() * th.A;
  const Matrix BtB = th.B.transpose() * th.B;
  const Matrix CtC = th.C.transpose() * th.C;
  const Matrix W2D = w2.asDiagonal() * th.D;
  const Matrix DtWD = th.D.transpose() * W2D;
  const Dims4& d = p.dims();
  switch (mode) {
    case 1:
      G = BtB.cwiseProduct(CtC).cwiseProduct(DtWD);
      M = mttkrp(Y, th.B, th.C, W2D, 1);
      break;
    case 2:
      G = AtA.cwiseProduct(CtC).cwiseProduct(DtWD);
      M = projection ? mttkrp_from_projection(*projection, d, th.C, W2D, 2)
                     : mttkrp(Y, th.A, th.C, W2D, 2);
      break;
    case 3:
      G = AtA.cwiseProduct(BtB).cwiseProduct(DtWD);
      M = projection ? mttkrp_from_projection(*projection, d, th.B, W2D, 3)
                     : mttkrp(Y, th.A, th.B, W2D, 3);
      break;
    case 4:
      G = AtA.cwiseProduct(BtB).cwiseProduct(CtC);
      M = projection ? mttkrp_from_projection(*projection, d, th.B, th.C, 4)
                     : mttkrp(Y, th.A, th.B, th.C, 4);
      M = w2.asDiagonal() * M;
      break;
    default: throw ArgumentError("mode must be 1..4");
  }
}

// Gradient at the point `at` of factor `mode`, other factors from th.
Matrix gradient_at(int mode, const CompletionProblem& p, const Matrix& at, const Matrix& G,
                   const Matrix& M) {
  Matrix g;
  if (mode == 4) {
    g = 2.0 * (weight_vector(p.weights_sq()).asDiagonal() * (at * G) - M);
  } else {
    g = 2.0 * (at * G - M);
  }
  if (mode == 1 && p.has_graph()) g += 2.0 * p.rho_A() * (p.laplacian() * at);
  if ((mode == 3 || mode == 4) && p.rho() > 0.0) {
    g += 2.0 * p.rho() * SmoothnessOperator(static_cast<std::size_t>(at.rows())).apply_normal(at);
  }
  return g;
}

double frob_observed(const Tensor4& X, const ObservationMask& mask) {
  const auto& d = X.dims();
  double sum = 0.0;
  for (std::size_t s = 0; s < d.S; ++s)
    for (std::size_t k = 0; k < d.K; ++k) {
      const auto state = mask.slab_state(k, s);
      if (state == ObservationMask::SlabState::kMissing) continue;
      const double* x = X.fiber(0, k, s);
      if (state == ObservationMask::SlabState::kObserved) {
        for (std::size_t e = 0; e < d.I * d.J; ++e) sum += x[e] * x[e];
      } else {
        const auto bits = mask.partial_entries(k, s);
        for (std::size_t e = 0; e < d.I * d.J; ++e)
          if (bits[e]) sum += x[e] * x[e];
      }
    }
  return std::sqrt(sum);
}

}  // namespace

// ---------------------------------------------------------------------------

void SolverConfig::validate() const {
  if (rank == 0) throw ArgumentError("rank must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("alpha must lie in (0, 1)");
  if (!(rho_A >= 0.0) || !(rho >= 0.0)) throw ArgumentError("rho_A and rho must be >= 0");
  if (!(tol_rel_obj > 0.0) || !(tol_station > 0.0)) throw ArgumentError("tolerances must be > 0");
  if (!(lipschitz_tol >= 0.0)) throw ArgumentError("lipschitz_tol must be >= 0");
  if (!(restart_tol >= 0.0)) throw ArgumentError("restart_tol must be >= 0");
}

std::vector<double> build_weighting(double alpha, std::size_t S, std::size_t K) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("alpha must lie in (0, 1)");
  const std::size_t full = S + 1 > K ? S + 1 - K : 0;
  std::vector<double> w(S, 1.0 - alpha);
  std::fill(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(std::min(full, S)), alpha);
  return w;
}

CompletionProblem::CompletionProblem(Tensor4 data, ObservationMask mask,
                                     std::vector<double> weights_sq, Matrix laplacian, double rho_A,
                                     double rho)
    : data_(std::move(data)),
      mask_(std::move(mask)),
      weights_sq_(std::move(weights_sq)),
      laplacian_(std::move(laplacian)),
      rho_A_(rho_A),
      rho_(rho) {
  const Dims4& d = data_.dims();
  if (!(mask_.dims() == d)) throw ArgumentError("mask dims do not match the data");
  if (weights_sq_.size() != d.S) throw ArgumentError("need one weight per GD slab");
  for (double w : weights_sq_)
    if (!(w >= 0.0) || !std::isfinite(w)) throw ArgumentError("slab weights must be >= 0");
  if (laplacian_.size() > 0 && (laplacian_.rows() != idx(d.I) || laplacian_.cols() != idx(d.I))) {
    throw ArgumentError("Laplacian size does not match the location count");
  }
  if (!(rho_A_ >= 0.0) || !(rho_ >= 0.0)) throw ArgumentError("rho_A and rho must be >= 0");
  max_weight_sq_ = weights_sq_.empty() ? 0.0 : *std::max_element(weights_sq_.begin(), weights_sq_.end());
  if (has_graph()) reg_bound_[0] = 2.0 * rho_A_ * spectral_upper_bound(laplacian_);
  if (rho_ > 0.0) {
    if (d.K > 0) reg_bound_[2] = 2.0 * rho_ * SmoothnessOperator(d.K).normal_largest_eig();
    if (d.S > 0) reg_bound_[3] = 2.0 * rho_ * SmoothnessOperator(d.S).normal_largest_eig();
  }
  observed_norm_ = frob_observed(data_, mask_);
}

CompletionProblem CompletionProblem::from_dataset(const MultiVersionDataset& ds,
                                                  const LocationGraph& graph, double alpha,
                                                  double rho_A, double rho, double scale) {
  Matrix L;
  if (graph.size() != 0) {
    if (graph.size() != ds.I()) {
      throw ArgumentError("graph has " + std::to_string(graph.size()) + " nodes, data has " +
                          std::to_string(ds.I()) + " locations");
    }
    if (!graph.empty()) L = graph.laplacian();
  }
  Tensor4 X = ds.update_tensor();
  if (scale != 1.0)
    for (auto& v : X.values()) v *= scale;
  return CompletionProblem(std::move(X), ds.mask(), build_weighting(alpha, ds.S(), ds.K()),
                           std::move(L), rho_A, rho);
}

MomentumStep momentum_step(double e) {
  if (!(e >= 0.0)) throw ArgumentError("momentum sequence requires e >= 0");
  const double next = 0.5 * (1.0 + std::sqrt(4.0 * e * e + 1.0));
  const double nu = std::clamp((e - 1.0) / next, 0.0, std::nextafter(1.0, 0.0));
  return {next, nu};
}

// ---------------------------------------------------------------------------

double impute(const CompletionProblem& p, const FactorSet& th, Tensor4& Y) {
  check_shapes(p, th);
  const Dims4& d = p.dims();
  if (!(Y.dims() == d)) Y = Tensor4(d);
  const auto I = idx(d.I), J = idx(d.J);
  const Tensor4& X = p.data();
  Matrix scratch, model(I, J);
  double misfit = 0.0;
  for (std::size_t s = 0; s < d.S; ++s) {
    const double w2 = p.weights_sq()[s];
    double slab_misfit = 0.0;
    for (std::size_t k = 0; k < d.K; ++k) {
      const auto state = p.mask().slab_state(k, s);
      const double* x = X.fiber(0, k, s);
      double* y = Y.fiber(0, k, s);
      slab_model(th, k, s, scratch, model);
      const double* m = model.data();
      const std::size_t n = d.I * d.J;
      if (state == ObservationMask::SlabState::kObserved) {
        for (std::size_t e = 0; e < n; ++e) {
          y[e] = x[e];
          const double r = x[e] - m[e];
          slab_misfit += r * r;
        }
      } else if (state == ObservationMask::SlabState::kMissing) {
        std::copy(m, m + n, y);
      } else {
        const auto bits = p.mask().partial_entries(k, s);
        for (std::size_t e = 0; e < n; ++e) {
          if (bits[e]) {
            y[e] = x[e];
            const double r = x[e] - m[e];
            slab_misfit += r * r;
          } else {
            y[e] = m[e];
          }
        }
      }
    }
    misfit += w2 * slab_misfit;
  }
  return misfit + reg_value(p, th);
}

Tensor4 impute_Y(const CompletionProblem& problem, const FactorSet& theta) {
  Tensor4 Y;
  impute(problem, theta, Y);
  return Y;
}

double objective(const CompletionProblem& p, const FactorSet& th, const Tensor4& Y) {
  check_shapes(p, th);
  const Dims4& d = p.dims();
  if (!(Y.dims() == d)) throw ArgumentError("Y dims do not match the problem");
  Matrix scratch, model(idx(d.I), idx(d.J));
  double misfit = 0.0;
  for (std::size_t s = 0; s < d.S; ++s) {
    double slab = 0.0;
    for (std::size_t k = 0; k < d.K; ++k) {
      slab_model(th, k, s, scratch, model);
      slab += (ConstMap(Y.fiber(0, k, s), idx(d.I), idx(d.J)) - model).squaredNorm();
    }
    misfit += p.weights_sq()[s] * slab;
  }
  return misfit + reg_value(p, th);
}

Matrix gradient(const CompletionProblem& p, const FactorSet& th, const Tensor4& Y, int mode) {
  check_shapes(p, th);
  Matrix G, M;
  normal_terms(mode, p, th, Y, nullptr, G, M);
  return gradient_at(mode, p, th.factor(mode), G, M);
}

double update_factor(int mode, SolverState& st, const CompletionProblem& p, const SolverConfig& cfg,
                     const Matrix* projection) {
  Matrix G, M;
  normal_terms(mode, p, st.theta, st.Y, projection, G, M);
  Matrix& cur = st.theta.factor(mode);
  Matrix& prev = st.previous.factor(mode);
  const Matrix hat = st.nu > 0.0 ? Matrix(cur + st.nu * (cur - prev)) : cur;
  const Matrix g = gradient_at(mode, p, hat, G, M);
  if (!g.allFinite()) throw DivergenceError(st.iteration, "non-finite gradient in mode " + std::to_string(mode));

  EigOptions eig;
  eig.tol = cfg.lipschitz_tol;
  double gram_bound = 2.0 * spectral_upper_bound(G, eig);
  if (mode == 4) gram_bound *= p.max_weight_sq();
  const double gamma = gram_bound + p.reg_bound(mode);
  st.step[static_cast<std::size_t>(mode - 1)] = gamma;
  if (!(gamma > 0.0)) {
    // Degenerate block (all other factors zero): nothing to move.
    prev = cur;
    return 0.0;
  }
  Matrix next = cfg.literal_update ? Matrix(cur - g / gamma) : Matrix((hat - g / gamma).cwiseMax(0.0));
  if (!next.allFinite()) throw DivergenceError(st.iteration, "non-finite factor in mode " + std::to_string(mode));
  const double mapping = gamma * gamma * (next - hat).squaredNorm();
  prev = std::move(cur);
  cur = std::move(next);
  return mapping;
}

double sweep(SolverState& st, const CompletionProblem& p, const SolverConfig& cfg) {
  double sum = update_factor(1, st, p, cfg);
  const Matrix projection = project_fibers(st.Y, st.theta.A);
  for (int mode = 2; mode <= 4; ++mode) sum += update_factor(mode, st, p, cfg, &projection);
  return sum;
}

double stationarity_residual(const CompletionProblem& p, const FactorSet& th) {
  const Tensor4 Y = impute_Y(p, th);
  double sum = 0.0;
  for (int mode = 1; mode <= 4; ++mode) {
    const Matrix g = gradient(p, th, Y, mode);
    const Matrix& m = th.factor(mode);
    for (Eigen::Index c = 0; c < g.cols(); ++c)
      for (Eigen::Index r = 0; r < g.rows(); ++r) {
        const double pg = m(r, c) > 0.0 ? g(r, c) : std::min(g(r, c), 0.0);
        sum += pg * pg;
      }
  }
  const double denom = p.observed_norm() > 0.0 ? p.observed_norm() : 1.0;
  return std::sqrt(sum) / denom;
}

// ---------------------------------------------------------------------------

Vector fit_gd_row(const Tensor4& X, const ObservationMask& mask, std::size_t s, const Matrix& A,
                  const Matrix& B, const Matrix& C, const NnlsOptions& opt, const Vector& start,
                  NnlsInfo* info) {
  const Dims4& d = X.dims();
  if (s >= d.S) throw ArgumentError("GD slab out of range");
  if (A.rows() != idx(d.I) || B.rows() != idx(d.J) || C.rows() != idx(d.K) ||
      B.cols() != A.cols() || C.cols() != A.cols()) {
    throw ArgumentError("factor shapes do not match the data");
  }
  const Eigen::Index F = A.cols();
  const Matrix AB = (A.transpose() * A).cwiseProduct(B.transpose() * B);
  Matrix G = Matrix::Zero(F, F);
  Vector b = Vector::Zero(F);
  Matrix T;
  std::size_t observed = 0;
  for (std::size_t k = 0; k < d.K; ++k) {
    auto state = mask.slab_state(k, s);
    if (!opt.masked) state = ObservationMask::SlabState::kObserved;
    if (state == ObservationMask::SlabState::kMissing) continue;
    const Eigen::RowVectorXd c = C.row(idx(k));
    ConstMap slab(X.fiber(0, k, s), idx(d.I), idx(d.J));
    if (state == ObservationMask::SlabState::kObserved) {
      G += AB.cwiseProduct(c.transpose() * c);
      T.noalias() = slab * B;
      b += (A.cwiseProduct(T).colwise().sum().cwiseProduct(c)).transpose();
      observed += d.I * d.J;
    } else {
      const auto bits = mask.partial_entries(k, s);
      Vector h(F);
      for (std::size_t j = 0; j < d.J; ++j)
        for (std::size_t i = 0; i < d.I; ++i) {
          if (!bits[i + d.I * j]) continue;
          h = A.row(idx(i)).cwiseProduct(B.row(idx(j))).cwiseProduct(c).transpose();
          G.noalias() += h * h.transpose();
          b += slab(idx(i), idx(j)) * h;
          ++observed;
        }
    }
  }
  NnlsInfo local;
  Vector dvec = Vector::Zero(F);
  // b <= 0 with a PSD Hadamard-of-nonnegatives Gram puts the optimum at 0.
  if (observed == 0 || b.maxCoeff() <= 0.0) {
    local.zero_data = true;
    if (info) *info = local;
    return dvec;
  }
  const double L = spectral_upper_bound(G);
  if (!(L > 0.0)) {
    local.zero_data = true;
    if (info) *info = local;
    return dvec;
  }
  if (start.size() == F) dvec = start.cwiseMax(0.0);
  Vector y = dvec, next(F);
  double t = 1.0;
  for (std::size_t it = 0; it < opt.max_iters; ++it) {
    local.iterations = it + 1;
    next = (y - (G * y - b) / L).cwiseMax(0.0);
    // Gradient-based adaptive restart keeps the accelerated path monotone.
    if ((y - next).dot(next - dvec) > 0.0) {
      t = 1.0;
      y = dvec;
      next = (y - (G * y - b) / L).cwiseMax(0.0);
    }
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / tn) * (next - dvec);
    const double change = (next - dvec).norm();
    dvec = next;
    t = tn;
    if (change <= opt.tol * std::max(dvec.norm(), 1e-300)) break;
  }
  if (!dvec.allFinite()) throw DivergenceError(local.iterations, "non-finite NNLS iterate");
  if (info) *info = local;
  return dvec;
}

FactorSet init_factors(const Tensor4& X, const ObservationMask& mask, std::size_t fully_observed,
                       const SolverConfig& cfg, std::vector<std::string>* warnings) {
  cfg.validate();
  const Dims4& d = X.dims();
  if (fully_observed == 0 || fully_observed > d.S) {
    throw UnsupportedShapeError("initialization needs at least one fully observed GD slab (S >= K)");
  }
  const std::size_t F = cfg.rank;
  if (warnings) {
    std::size_t limit = SIZE_MAX;
    for (int mode = 1; mode <= 4; ++mode) {
      const std::size_t rows = mode == 4 ? fully_observed : d.extent(mode);
      const std::size_t cols = d.I * d.J * d.K * fully_observed / std::max<std::size_t>(rows, 1);
      limit = std::min(limit, std::min(rows, cols));
    }
    if (F > limit) {
      warnings->push_back("rank " + std::to_string(F) + " exceeds the smaller dimension (" +
                          std::to_string(limit) + ") of an unfolding");
    }
  }

  const Dims4 sub{d.I, d.J, d.K, fully_observed};
  const auto head = X.values().subspan(0, sub.size());
  Tensor4 Xs(sub, std::vector<double>(head.begin(), head.end()));

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto draw = [&](std::size_t rows) {
    Matrix m(idx(rows), idx(F));
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = u(rng);
    return m;
  };
  // A from a Gaussian sketch of the mode-1 fibers, so that relabeling
  // locations relabels the initial rows and nothing else.
  std::normal_distribution<double> gauss;
  Matrix sketch(idx(sub.J * sub.K * sub.S), idx(F));
  for (Eigen::Index c = 0; c < sketch.cols(); ++c)
    for (Eigen::Index r = 0; r < sketch.rows(); ++r) sketch(r, c) = gauss(rng);
  FactorSet th;
  th.A = (ConstMap(Xs.values().data(), idx(sub.I), sketch.rows()) * sketch).cwiseAbs();
  th.B = draw(d.J);
  th.C = draw(d.K);
  th.D = draw(fully_observed);

  // Match the model norm to the data norm, spread evenly over the factors.
  double data_sq = 0.0;
  for (double v : Xs.values()) data_sq += v * v;
  const double model_sq = gram_hadamard({&th.A, &th.B, &th.C, &th.D}).sum();
  if (data_sq == 0.0) {
    th.A.setZero();
    th.B.setZero();
    th.C.setZero();
    th.D.setZero();
  } else if (model_sq > 0.0) {
    const double c = std::pow(data_sq / model_sq, 0.125);
    th.A *= c;
    th.B *= c;
    th.C *= c;
    th.D *= c;
  }

  if (data_sq > 0.0 && cfg.init_iters > 0) {
    CompletionProblem ntf(std::move(Xs), ObservationMask::full(sub),
                          std::vector<double>(fully_observed, 1.0), Matrix(), 0.0, 0.0);
    SolverConfig inner = cfg;
    inner.max_outer_iters = cfg.init_iters;
    inner.rho_A = 0.0;
    inner.rho = 0.0;
    inner.literal_update = false;
    Diagnostics ignored;
    th = solve(ntf, std::move(th), inner, ignored).theta;
  }

  Matrix D(idx(d.S), idx(F));
  D.topRows(idx(fully_observed)) = th.D;
  NnlsOptions nnls;
  for (std::size_t s = fully_observed; s < d.S; ++s) {
    const Vector warm = D.row(idx(s - 1)).transpose();
    D.row(idx(s)) = fit_gd_row(X, mask, s, th.A, th.B, th.C, nnls, warm).transpose();
  }
  th.D = std::move(D);
  return th;
}

FactorSet init_factors(const MultiVersionDataset& ds, const SolverConfig& config) {
  if (ds.S() < ds.K()) {
    throw UnsupportedShapeError("initialization needs S >= K (S=" + std::to_string(ds.S()) +
                                ", K=" + std::to_string(ds.K()) + ")");
  }
  return init_factors(ds.update_tensor(), ds.mask(), ds.fully_observed_slabs(), config);
}

// ---------------------------------------------------------------------------

SolverState solve(const CompletionProblem& p, FactorSet initial, const SolverConfig& cfg,
                  Diagnostics& diag) {
  cfg.validate();
  check_shapes(p, initial);
  SolverState st;
  st.theta = std::move(initial);
  st.previous = st.theta;
  double obj = impute(p, st.theta, st.Y);
  if (!std::isfinite(obj)) throw DivergenceError(0, "non-finite initial objective");
  st.objective_trace.push_back(obj);
  diag.objective_trace.push_back(obj);
  const double denom = p.observed_norm() > 0.0 ? p.observed_norm() : 1.0;
  const auto t_solve = Clock::now();
  diag.stop_reason = "max_outer_iters";
  bool stopped = cfg.max_outer_iters == 0;
  for (std::size_t it = 1; it <= cfg.max_outer_iters; ++it) {
    const auto t0 = Clock::now();
    st.iteration = it;
    if (cfg.momentum == Momentum::kFista) {
      const MomentumStep m = momentum_step(st.e);
      st.e = m.e;
      st.nu = m.nu;
    } else {
      st.nu = 0.0;
    }
    const double mapping = sweep(st, p, cfg);
    const double next = impute(p, st.theta, st.Y);
    if (!std::isfinite(next)) throw DivergenceError(it, "non-finite objective");
    const double residual = std::sqrt(mapping) / denom;
    st.objective_trace.push_back(next);
    diag.objective_trace.push_back(next);
    diag.residual_trace.push_back(residual);
    diag.seconds_trace.push_back(seconds_since(t0));
    diag.iterations = it;
    if (cfg.momentum == Momentum::kFista && next > obj + cfg.restart_tol * std::abs(obj)) {
      st.e = 0.0;
      ++diag.restarts;
    }
    const double rel = std::abs(obj - next) / std::max(std::abs(obj), 1e-300);
    obj = next;
    if (residual < cfg.tol_station) {
      diag.stop_reason = "tol_station";
      stopped = true;
      break;
    }
    if (rel < cfg.tol_rel_obj) {
      diag.stop_reason = "tol_rel_obj";
      stopped = true;
      break;
    }
  }
  if (!stopped) diag.warnings.push_back("reached max_outer_iters without meeting a tolerance");
  diag.solve_seconds += seconds_since(t_solve);
  diag.final_residual = stationarity_residual(p, st.theta);
  return st;
}

Tensor3 marginal_window(const FactorSet& th, std::size_t first, std::size_t last) {
  th.check_rank();
  if (first > last || last > static_cast<std::size_t>(th.D.rows())) {
    throw ArgumentError("marginal window out of range");
  }
  const std::size_t I = static_cast<std::size_t>(th.A.rows());
  const std::size_t J = static_cast<std::size_t>(th.B.rows());
  Tensor3 out(I, J, last - first);
  const Eigen::RowVectorXd csum = th.C.colwise().sum();
  Matrix scaled;
  for (std::size_t s = first; s < last; ++s) {
    const Eigen::RowVectorXd w = th.D.row(idx(s)).cwiseProduct(csum);
    scaled = th.A.array().rowwise() * w.array();
    MutMap(out.values().data() + I * J * (s - first), idx(I), idx(J)).noalias() =
        scaled * th.B.transpose();
  }
  return out;
}

Tensor3 hybrid_estimate(const MultiVersionDataset& ds, const Tensor3& model) {
  if (model.I() != ds.I() || model.J() != ds.J() || model.S() != ds.S()) {
    throw ArgumentError("model estimate shape does not match the dataset");
  }
  const Tensor3 observed = aggregate(ds);
  Tensor3 out = model;
  const std::size_t full = ds.fully_observed_slabs();
  const std::size_t slab = ds.I() * ds.J();
  std::copy(observed.values().begin(), observed.values().begin() + static_cast<std::ptrdiff_t>(full * slab),
            out.values().begin());
  return out;
}

FitResult fit(const MultiVersionDataset& ds, const LocationGraph& graph, const SolverConfig& cfg) {
  cfg.validate();
  if (ds.S() < ds.K()) {
    throw UnsupportedShapeError("fit needs S >= K (S=" + std::to_string(ds.S()) +
                                ", K=" + std::to_string(ds.K()) + ")");
  }
  if (ds.S() == 0) throw UnsupportedShapeError("fit needs at least one GD slab");
  double scale = 1.0;
  if (cfg.scale_data) {
    const Tensor4 observed = project_mask(ds.update_tensor(), ds.mask(), Keep::kInside);
    double peak = 0.0;
    for (double v : observed.values()) peak = std::max(peak, v);
    if (peak > 0.0) scale = 1.0 / peak;
  }
  const CompletionProblem problem =
      CompletionProblem::from_dataset(ds, graph, cfg.alpha, cfg.rho_A, cfg.rho, scale);

  FitResult result;
  Diagnostics& diag = result.diagnostics;
  diag.scale = scale;
  const auto t0 = Clock::now();
  FactorSet theta = init_factors(problem.data(), problem.mask(), ds.fully_observed_slabs(), cfg,
                                 &diag.warnings);
  diag.init_seconds = seconds_since(t0);

  if (ds.fully_observed_slabs() == ds.S()) {
    // Nothing to complete.
    Tensor4 Y;
    diag.objective_trace.push_back(impute(problem, theta, Y));
    diag.stop_reason = "fully_observed";
    diag.final_residual = stationarity_residual(problem, theta);
  } else {
    theta = solve(problem, std::move(theta), cfg, diag).theta;
  }
  theta.A /= scale;
  result.theta = std::move(theta);
  result.estimate = marginal_window(result.theta, 0, ds.S());
  result.hybrid = hybrid_estimate(ds, result.estimate);
  return result;
}

}  // namespace mvtc
