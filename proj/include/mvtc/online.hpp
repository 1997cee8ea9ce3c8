#pragma once

#include "mvtc/multiversion.hpp"
#include "mvtc/regularization.hpp"
#include "mvtc/solver.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace mvtc {

struct TrackerConfig {
  SolverConfig solver;
  std::size_t fp_iters = 50;
  double fp_tol = 1e-8;
  /// Fit the new GD row against every update slot, unobserved ones as zeros.
  bool literal_fp = false;
  /// Full batch refit every this many arrivals; 0 disables.
  std::size_t resync_every = 0;

  void validate() const;
};

/// Factors are held in the solver's scaled units (data times `scale`, fixed
/// by the initial batch fit); the dataset is kept in data units.
struct TrackerState {
  FactorSet theta;
  MultiVersionDataset ds;
  LocationGraph graph;
  TrackerConfig config;
  double scale = 1.0;
  std::size_t arrivals = 0;

  /// theta in data units.
  FactorSet factors() const;
};

/// Runs a batch fit on `ds` and starts tracking from it. The fit is written
/// to `initial` when given.
TrackerState start_tracker(const MultiVersionDataset& ds, const LocationGraph& graph,
                           const TrackerConfig& config, FitResult* initial = nullptr);
/// Starts from an existing batch fit of `ds`.
TrackerState start_tracker(const MultiVersionDataset& ds, const LocationGraph& graph,
                           const TrackerConfig& config, const FitResult& initial);

struct FpInfo {
  std::size_t iterations = 0;
  bool zero_slab = false;
};

/// Row of D for the newest GD of `next` (which has one more slab than
/// state.ds), by masked NNLS against the current A, B, C. Scaled units.
Vector fp_step(const TrackerState& state, const MultiVersionDataset& next, FpInfo* info = nullptr);

struct BpInfo {
  double residual = 0.0;  ///< relative gradient-mapping norm of the sweep
};

/// Appends `d` to D, imputes Y against `next` and runs one momentum-free
/// block sweep over A, B, C, D. state.ds becomes `next`.
void bp_step(TrackerState& state, MultiVersionDataset next, const Vector& d,
             BpInfo* info = nullptr);

struct ArrivalReport {
  std::int64_t ld = 0;
  std::int64_t first_window_gd = 0;  ///< GD of window slab 0
  Tensor3 window;                    ///< marginal estimates of the last K-1 GDs
  double seconds = 0.0;
  std::size_t fp_iters = 0;
  bool zero_slab = false;
  bool resynced = false;
  double residual = 0.0;
};

/// Folds the events of loading date `ld` (must be horizon + 1, every event
/// carrying that LD) into the dataset, then FP and BP. Throws StreamError on
/// a wrong LD.
ArrivalReport arrive(TrackerState& state, std::span<const UpdateEvent> events, std::int64_t ld);

/// Replays a stream ordered by LD. LDs with no events still advance the
/// horizon. Throws StreamError when the LD decreases or was already folded.
std::vector<ArrivalReport> track(TrackerState& state, std::span<const UpdateEvent> stream);

}  // namespace mvtc
