#include "mvtc/metrics.hpp"

#include "mvtc/errors.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <tuple>

namespace mvtc {

ScoreReport score(std::span<const double> estimate, std::span<const double> truth) {
  if (estimate.size() != truth.size()) {
    throw ArgumentError("estimate and truth are not aligned (" + std::to_string(estimate.size()) +
                        " vs " + std::to_string(truth.size()) + " values)");
  }
  if (truth.empty()) throw ArgumentError("nothing to score");
  const double n = static_cast<double>(truth.size());
  double se = 0.0, ae = 0.0, sum = 0.0, sq = 0.0;
  for (std::size_t e = 0; e < truth.size(); ++e) {
    const double r = estimate[e] - truth[e];
    se += r * r;
    ae += std::abs(r);
    sum += truth[e];
    sq += truth[e] * truth[e];
  }
  ScoreReport out;
  out.n = truth.size();
  out.rmse = std::sqrt(se / n);
  out.mae = ae / n;
  const double rms = std::sqrt(sq / n);
  out.relative_rmse = rms > 0.0 ? out.rmse / rms
                                : (out.rmse == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
  const double mean = sum / n;
  double tss = 0.0;
  for (double t : truth) tss += (t - mean) * (t - mean);
  if (tss > 0.0) out.r2 = 1.0 - se / tss;
  return out;
}

ScoreReport score_cells(const std::vector<CellValue>& estimate, const std::vector<CellValue>& truth) {
  using Key = std::tuple<std::int64_t, std::size_t, std::size_t>;
  std::map<Key, double> lookup;
  for (const auto& c : estimate) {
    if (!lookup.emplace(Key{c.gd, c.location, c.feature}, c.value).second) {
      throw ArgumentError("duplicate estimate for gd " + std::to_string(c.gd) + ", location " +
                          std::to_string(c.location) + ", feature " + std::to_string(c.feature));
    }
  }
  std::vector<double> est, tru;
  est.reserve(truth.size());
  tru.reserve(truth.size());
  for (const auto& c : truth) {
    const auto it = lookup.find(Key{c.gd, c.location, c.feature});
    if (it == lookup.end()) {
      throw ArgumentError("estimate and truth are not aligned: no estimate for gd " +
                          std::to_string(c.gd) + ", location " + std::to_string(c.location) +
                          ", feature " + std::to_string(c.feature));
    }
    est.push_back(it->second);
    tru.push_back(c.value);
  }
  return score(est, tru);
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  out.n = values.size();
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(var / static_cast<double>(values.size()));
  return out;
}

}  // namespace mvtc
