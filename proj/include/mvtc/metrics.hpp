#pragma once

#include "mvtc/csv.hpp"

#include <optional>
#include <span>
#include <vector>

namespace mvtc {

struct ScoreReport {
  double rmse = 0.0;
  double mae = 0.0;
  /// rmse over the root mean square of the truth; infinite for all-zero truth
  /// with a nonzero error.
  double relative_rmse = 0.0;
  /// Undefined when the truth has zero variance.
  std::optional<double> r2;
  std::size_t n = 0;
};

/// Elementwise scores. Throws ArgumentError on empty or unequal inputs.
ScoreReport score(std::span<const double> estimate, std::span<const double> truth);

/// Scores every truth cell against the estimate with the same (location,
/// feature, gd). Throws ArgumentError when an estimate is missing or
/// duplicated.
ScoreReport score_cells(const std::vector<CellValue>& estimate, const std::vector<CellValue>& truth);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  ///< population standard deviation
  std::size_t n = 0;
};

MeanStd mean_std(std::span<const double> values);

}  // namespace mvtc
