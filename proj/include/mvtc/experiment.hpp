#pragma once

#include "mvtc/csv.hpp"
#include "mvtc/metrics.hpp"
#include "mvtc/online.hpp"
#include "mvtc/solver.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mvtc {

/// Estimate cells for every truth cell, read from a tensor whose slab s is
/// GD epoch + s. Throws ArgumentError for a truth GD outside the tensor.
std::vector<CellValue> cells_for(const Tensor3& estimate, std::int64_t epoch,
                                 const std::vector<CellValue>& truth);

struct MethodScore {
  std::string method;
  ScoreReport overall;
  std::vector<std::pair<std::int64_t, ScoreReport>> per_gd;  ///< ascending gd
  std::vector<CellValue> estimates;                           ///< aligned with truth
};

struct StaticReport {
  std::vector<MethodScore> methods;  ///< naive, mtc, then mtc_unregularized
  FitResult mtc;
  FitResult ablation;  ///< empty unless requested
};

/// Naive vs MTC (vs MTC with rho_A = rho = 0) on the withheld truth cells.
StaticReport run_static(const MultiVersionDataset& ds, const LocationGraph& graph,
                        const std::vector<CellValue>& truth, const SolverConfig& config,
                        bool with_ablation = true);

struct DynamicOptions {
  TrackerConfig tracker;
  bool batch_restart = true;
  /// Score each GD only at the arrival that introduces it.
  bool first_appearance_only = false;
};

struct ArrivalScore {
  std::int64_t ld = 0;
  std::vector<std::pair<std::int64_t, ScoreReport>> online;
  std::vector<std::pair<std::int64_t, ScoreReport>> batch;
  double online_seconds = 0.0;
  double batch_seconds = 0.0;
  std::size_t fp_iters = 0;
  double residual = 0.0;
  std::vector<CellValue> online_estimates;  ///< the whole window
};

struct DynamicSummary {
  MeanStd rmse, mae, relative_rmse;
  MeanStd seconds;
};

struct DynamicReport {
  std::vector<ArrivalScore> arrivals;
  DynamicSummary online;
  DynamicSummary batch;  ///< n == 0 without the batch-restart arm
  double initial_fit_seconds = 0.0;
};

/// Starts from the data visible at `start.horizon`, then replays every LD up
/// to `final_horizon`. `truth` must cover every GD that enters the window.
DynamicReport run_dynamic(std::span<const UpdateEvent> events, const IngestOptions& start,
                          std::int64_t final_horizon, const std::vector<CellValue>& truth,
                          const LocationGraph& graph, const DynamicOptions& options);

// Factor export ------------------------------------------------------------

struct ColumnMatch {
  std::vector<std::size_t> perm;   ///< estimate column perm[f] matches reference column f
  std::vector<double> congruence;  ///< product of per-mode cosines, per reference column
  double mean_congruence = 0.0;
};

/// Per-mode Euclidean column norms, indexed [mode - 1][f].
std::vector<std::vector<double>> column_norms(const FactorSet& theta);

/// Greedy matching of estimate columns to reference columns by congruence.
/// Ranks may differ; unmatched reference columns get congruence 0 and
/// perm index SIZE_MAX.
ColumnMatch match_columns(const FactorSet& estimate, const FactorSet& reference);

/// JSON document {dims, rank, factors: {A,B,C,D row-major}, config, seed,
/// objective_trace, column_norms}.
std::string export_factors_json(const FactorSet& theta, const SolverConfig& config,
                                const std::vector<double>& objective_trace = {});
/// Parses the `factors` part of an export.
FactorSet import_factors_json(const std::string& text);

// Benchmark ----------------------------------------------------------------

struct BenchPoint {
  std::string dim;
  std::size_t value = 0;
  double seconds_per_iter = 0.0;
};

/// Median wall time of one outer iteration (sweep plus imputation) on a
/// random instance with an age mask and both regularizers active.
double bench_iteration(const Dims4& dims, std::size_t rank, std::size_t iters, std::uint64_t seed);

/// The base point followed by I, S and F doubled one at a time.
std::vector<BenchPoint> bench_scaling(const Dims4& base, std::size_t rank, std::size_t iters,
                                      std::uint64_t seed);

}  // namespace mvtc
