#pragma once

#include "mvtc/multiversion.hpp"
#include "mvtc/regularization.hpp"
#include "mvtc/tensor.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace mvtc {

enum class Momentum { kNone, kFista };

struct SolverConfig {
  std::size_t rank = 2;
  double alpha = 0.7;
  double rho_A = 0.01;
  double rho = 0.01;
  std::size_t max_outer_iters = 500;
  double tol_rel_obj = 1e-9;
  double tol_station = 1e-7;
  Momentum momentum = Momentum::kFista;
  std::size_t init_iters = 200;
  std::uint64_t seed = 0;
  /// Unprojected step from the non-extrapolated point, M - grad(M^)/gamma.
  /// Factors may leave the nonnegative orthant in this mode.
  bool literal_update = false;
  /// Divide the data by its largest observed entry before solving.
  bool scale_data = true;
  /// Inflation of the Gram spectral estimate in the step size.
  double lipschitz_tol = 1e-6;
  /// Relative objective increase that resets the momentum sequence.
  double restart_tol = 1e-6;

  /// Throws ArgumentError unless alpha in (0,1), rho's >= 0, tolerances > 0,
  /// rank >= 1.
  void validate() const;
};

/// Squared slab weights w_s^2: alpha for slabs [0, S-K+1), 1-alpha after.
std::vector<double> build_weighting(double alpha, std::size_t S, std::size_t K);

/// Data, mask, weights and regularizers of one completion problem:
///   sum_s w_s^2 ||P_Omega(X_s - Xhat_s)||^2 + rho_A tr(A^T L A)
///   + rho ||Gamma C||^2 + rho ||Gamma D||^2.
class CompletionProblem {
 public:
  CompletionProblem(Tensor4 data, ObservationMask mask, std::vector<double> weights_sq,
                    Matrix laplacian, double rho_A, double rho);

  /// Problem for a dataset, its data multiplied by `scale`. An edgeless or
  /// empty graph disables the graph term.
  static CompletionProblem from_dataset(const MultiVersionDataset& ds, const LocationGraph& graph,
                                        double alpha, double rho_A, double rho, double scale = 1.0);

  const Dims4& dims() const { return data_.dims(); }
  const Tensor4& data() const { return data_; }
  const ObservationMask& mask() const { return mask_; }
  const std::vector<double>& weights_sq() const { return weights_sq_; }
  double max_weight_sq() const { return max_weight_sq_; }
  bool has_graph() const { return laplacian_.size() > 0 && rho_A_ > 0.0; }
  const Matrix& laplacian() const { return laplacian_; }
  double rho_A() const { return rho_A_; }
  double rho() const { return rho_; }
  /// Cached spectral bound of the regularizer Hessian for mode 1..4.
  double reg_bound(int mode) const { return reg_bound_[static_cast<std::size_t>(mode - 1)]; }
  /// ||P_Omega(X)||_F.
  double observed_norm() const { return observed_norm_; }

 private:
  Tensor4 data_;
  ObservationMask mask_;
  std::vector<double> weights_sq_;
  double max_weight_sq_ = 0.0;
  Matrix laplacian_;
  double rho_A_, rho_;
  std::array<double, 4> reg_bound_{};
  double observed_norm_ = 0.0;
};

struct SolverState {
  FactorSet theta;
  FactorSet previous;
  Tensor4 Y;
  double e = 0.0;
  double nu = 0.0;
  std::vector<double> objective_trace;
  std::array<double, 4> step{};  ///< gamma of the latest update per mode
  std::size_t iteration = 0;
};

struct MomentumStep {
  double e;
  double nu;
};

/// e' = (1 + sqrt(4 e^2 + 1)) / 2, nu = clamp((e - 1) / e', 0, 1).
MomentumStep momentum_step(double e);

/// Y = P_Omega^c(reconstruct(theta)) + P_Omega(X), written into `Y` (resized
/// when needed). Returns the objective at theta, which with this Y equals the
/// masked objective.
double impute(const CompletionProblem& problem, const FactorSet& theta, Tensor4& Y);
Tensor4 impute_Y(const CompletionProblem& problem, const FactorSet& theta);

/// Weighted misfit against Y plus all regularizer terms.
double objective(const CompletionProblem& problem, const FactorSet& theta, const Tensor4& Y);

/// Exact gradient of objective(problem, ., Y) with respect to factor `mode`.
Matrix gradient(const CompletionProblem& problem, const FactorSet& theta, const Tensor4& Y,
                int mode);

/// One prox-linear block update of factor `mode` against state.Y, from the
/// point extrapolated with state.nu. `projection`, when given, must equal
/// project_fibers(state.Y, state.theta.A) and is reused for modes 2..4.
/// Returns gamma^2 ||M_new - M^||^2, the squared gradient-mapping norm.
double update_factor(int mode, SolverState& state, const CompletionProblem& problem,
                     const SolverConfig& config, const Matrix* projection = nullptr);

/// Update A, B, C, D in order against the current Y. Returns the summed
/// squared gradient-mapping norm.
double sweep(SolverState& state, const CompletionProblem& problem, const SolverConfig& config);

/// Norm of the projected gradient (zero where a factor sits at its bound with
/// a nonnegative gradient), relative to ||P_Omega(X)||_F.
double stationarity_residual(const CompletionProblem& problem, const FactorSet& theta);

struct NnlsOptions {
  std::size_t max_iters = 10000;
  double tol = 1e-8;
  bool masked = true;  ///< false: unobserved entries count as zeros
};

struct NnlsInfo {
  std::size_t iterations = 0;
  bool zero_data = false;  ///< nothing observed, or all observed values zero
};

/// argmin_{d >= 0} ||P_Omega(X(:,:,:,s)) - P_Omega((A kr B kr C) d)||^2 by
/// accelerated projected gradient with step 1/lambda_max(Gram). `start`, when
/// non-empty, is the initial point.
Vector fit_gd_row(const Tensor4& X, const ObservationMask& mask, std::size_t s, const Matrix& A,
                  const Matrix& B, const Matrix& C, const NnlsOptions& options = {},
                  const Vector& start = Vector(), NnlsInfo* info = nullptr);

/// Nonnegative CP fit of the first `fully_observed` slabs followed by masked
/// NNLS for the remaining rows of D. Throws UnsupportedShapeError when
/// fully_observed == 0.
FactorSet init_factors(const Tensor4& X, const ObservationMask& mask, std::size_t fully_observed,
                       const SolverConfig& config, std::vector<std::string>* warnings = nullptr);
FactorSet init_factors(const MultiVersionDataset& ds, const SolverConfig& config);

struct Diagnostics {
  std::vector<double> objective_trace;  ///< entry 0 is the initial point
  std::vector<double> residual_trace;   ///< relative gradient-mapping norm
  std::vector<double> seconds_trace;    ///< wall time per outer iteration
  std::size_t iterations = 0;
  std::string stop_reason;
  std::vector<std::string> warnings;
  std::size_t restarts = 0;
  double init_seconds = 0.0;
  double solve_seconds = 0.0;
  double final_residual = 0.0;  ///< stationarity_residual at the returned point
  double scale = 1.0;           ///< data multiplier used while solving
};

struct FitResult {
  FactorSet theta;   ///< in data units
  Tensor3 estimate;  ///< marginalized model, every GD
  Tensor3 hybrid;    ///< observed totals for fully reported GDs, model otherwise
  Diagnostics diagnostics;
};

/// Two-stage initialization, then alternating block updates and imputation
/// until a stopping rule fires.
FitResult fit(const MultiVersionDataset& ds, const LocationGraph& graph, const SolverConfig& config);

/// Lower-level entry: solve `problem` from `initial`, recording into `diag`.
SolverState solve(const CompletionProblem& problem, FactorSet initial, const SolverConfig& config,
                  Diagnostics& diag);

/// Marginal estimate for GD slabs [first, last) without forming the full
/// reconstruction. Result has last - first slabs.
Tensor3 marginal_window(const FactorSet& theta, std::size_t first, std::size_t last);

/// Observed totals for slabs [0, fully_observed), model elsewhere.
Tensor3 hybrid_estimate(const MultiVersionDataset& ds, const Tensor3& model);

}  // namespace mvtc
