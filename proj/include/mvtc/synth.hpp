#pragma once

#include "mvtc/csv.hpp"
#include "mvtc/multiversion.hpp"
#include "mvtc/regularization.hpp"
#include "mvtc/tensor.hpp"

#include <cstdint>
#include <vector>

namespace mvtc {

struct GeneratorConfig {
  std::size_t I = 10, J = 5, S = 30, K = 3, F = 2;
  std::uint64_t seed = 0;
  /// Fixed delay profile p_1..p_K (sums to 1). Empty: default_profile(K).
  std::vector<double> fractions;
  /// When non-empty (size K), every entry draws its own split from a
  /// Dirichlet with these concentrations instead of using `fractions`.
  std::vector<double> concentration;
  /// Log-normal multiplicative jitter on the fractions, renormalized.
  double noise_scale = 0.0;
  /// Moving-average smoothing of the GD factor columns.
  bool factor_smoothness = false;
  std::size_t smoothing_window = 5;
  /// i.i.d. nonnegative perturbation of the totals, as a multiple of their
  /// mean; breaks the exact low-rank structure.
  double mismatch_scale = 0.0;
  /// Planted location communities (0 = none). Rows of A in one community
  /// share a centroid; the generated graph links all pairs inside one.
  std::size_t communities = 0;
  double community_spread = 0.1;
  /// Every factor entry set to 1 instead of drawn.
  bool constant_factors = false;

  /// Throws ArgumentError on inconsistent settings.
  void validate() const;
  /// `fractions`, or the default when empty.
  std::vector<double> profile() const;
};

/// Exponentially decaying delay profile; (0.6, 0.25, 0.1, 0.05) for K = 4.
std::vector<double> default_profile(std::size_t K);

struct GroundTruth {
  FactorSet factors;          ///< drawn A, B, C, D
  Tensor3 totals;             ///< Z~(i,j,s) = sum_f A B D (sum_k C)
  std::vector<std::size_t> community;  ///< per location, when planted
  LocationGraph graph;        ///< community graph (edgeless otherwise)
};

GroundTruth gen_ground_truth(const GeneratorConfig& cfg);

/// Splits each total into K increments by per-entry fractions. The last
/// increment takes the residual, so summing over k in ascending order
/// reproduces the total bit for bit.
Tensor4 split_updates(const Tensor3& totals, const GeneratorConfig& cfg);

/// For a fixed profile the split tensor is exactly rank F: this returns
/// factors (A, B, C', D) with C'(k, f) = p_k * sum_k C(k, f).
FactorSet planted_update_factors(const GroundTruth& truth, const GeneratorConfig& cfg);

struct EmittedData {
  std::vector<UpdateEvent> events;    ///< ordered by ld, gd, location, feature
  std::vector<CellValue> withheld;    ///< true totals of the last K-1 GDs
};

/// Events visible at `horizon` (GD of slab s is epoch + s, update k loads on
/// LD gd + k); zero increments are not emitted.
EmittedData emit_events(const Tensor4& updates, std::int64_t horizon, std::size_t K,
                        std::int64_t epoch = 0);

/// True totals of every GD slab as cells.
std::vector<CellValue> truth_cells(const Tensor4& updates, std::int64_t epoch = 0);

}  // namespace mvtc
