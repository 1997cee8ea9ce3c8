#include "mvtc/online.hpp"

#include "mvtc/errors.hpp"

#include <chrono>
#include <cmath>

namespace mvtc {
namespace {

using Clock = std::chrono::steady_clock;

}  // namespace

void TrackerConfig::validate() const {
  solver.validate();
  if (fp_iters == 0) throw ArgumentError("fp_iters must be >= 1");
  if (!(fp_tol > 0.0)) throw ArgumentError("fp_tol must be > 0");
}

FactorSet TrackerState::factors() const {
  FactorSet out = theta;
  out.A /= scale;
  return out;
}

TrackerState start_tracker(const MultiVersionDataset& ds, const LocationGraph& graph,
                           const TrackerConfig& config, const FitResult& initial) {
  config.validate();
  if (static_cast<std::size_t>(initial.theta.D.rows()) != ds.S()) {
    throw ArgumentError("initial fit does not match the dataset");
  }
  TrackerState st;
  st.theta = initial.theta;
  st.scale = initial.diagnostics.scale;
  st.theta.A *= st.scale;
  st.ds = ds;
  st.graph = graph;
  st.config = config;
  return st;
}

TrackerState start_tracker(const MultiVersionDataset& ds, const LocationGraph& graph,
                           const TrackerConfig& config, FitResult* initial) {
  config.validate();
  FitResult result = fit(ds, graph, config.solver);
  TrackerState st = start_tracker(ds, graph, config, result);
  if (initial) *initial = std::move(result);
  return st;
}

Vector fp_step(const TrackerState& st, const MultiVersionDataset& next, FpInfo* info) {
  if (next.S() != st.ds.S() + 1 || next.I() != st.ds.I() || next.J() != st.ds.J() ||
      next.K() != st.ds.K()) {
    throw ArgumentError("FP needs the dataset with exactly one new GD slab");
  }
  NnlsOptions opt;
  opt.max_iters = st.config.fp_iters;
  opt.tol = st.config.fp_tol;
  opt.masked = !st.config.literal_fp;
  // Fitting data-unit X against (A / scale, B, C) yields the row in scaled
  // units directly, without copying a scaled tensor.
  Vector warm;
  if (st.theta.D.rows() > 0) warm = st.theta.D.row(st.theta.D.rows() - 1).transpose();
  NnlsInfo nnls;
  Vector d = fit_gd_row(next.update_tensor(), next.mask(), next.S() - 1, st.theta.A / st.scale,
                        st.theta.B, st.theta.C, opt, warm, &nnls);
  if (info) *info = {nnls.iterations, nnls.zero_data};
  return d;
}

void bp_step(TrackerState& st, MultiVersionDataset next, const Vector& d, BpInfo* info) {
  if (next.S() != st.ds.S() + 1) throw ArgumentError("BP needs the dataset with one new GD slab");
  if (d.size() != st.theta.D.cols()) throw ArgumentError("new GD row has the wrong rank");
  const SolverConfig& cfg = st.config.solver;
  const CompletionProblem problem =
      CompletionProblem::from_dataset(next, st.graph, cfg.alpha, cfg.rho_A, cfg.rho, st.scale);
  SolverState s;
  s.theta = std::move(st.theta);
  s.theta.D.conservativeResize(s.theta.D.rows() + 1, Eigen::NoChange);
  s.theta.D.row(s.theta.D.rows() - 1) = d.transpose();
  s.previous = s.theta;
  s.nu = 0.0;
  s.iteration = st.arrivals + 1;
  impute(problem, s.theta, s.Y);
  const double mapping = sweep(s, problem, cfg);
  st.theta = std::move(s.theta);
  st.ds = std::move(next);
  if (info) {
    const double denom = problem.observed_norm() > 0.0 ? problem.observed_norm() : 1.0;
    info->residual = std::sqrt(mapping) / denom;
  }
}

ArrivalReport arrive(TrackerState& st, std::span<const UpdateEvent> events, std::int64_t ld) {
  if (ld != st.ds.horizon() + 1) {
    throw StreamError("expected loading date " + std::to_string(st.ds.horizon() + 1) + ", got " +
                      std::to_string(ld));
  }
  for (const auto& e : events) {
    if (e.ld != ld) {
      throw StreamError("event with loading date " + std::to_string(e.ld) +
                        " inside the arrival for " + std::to_string(ld));
    }
  }
  const auto t0 = Clock::now();
  ArrivalReport report;
  report.ld = ld;
  MultiVersionDataset next = st.ds.advance(events, ld);
  FpInfo fp;
  const Vector d = fp_step(st, next, &fp);
  BpInfo bp;
  bp_step(st, std::move(next), d, &bp);
  ++st.arrivals;
  const std::size_t R = st.config.resync_every;
  if (R > 0 && st.arrivals % R == 0) {
    FitResult refit = fit(st.ds, st.graph, st.config.solver);
    st.theta = std::move(refit.theta);
    st.theta.A *= st.scale;
    report.resynced = true;
  }
  const std::size_t S = st.ds.S();
  const std::size_t K = st.ds.K();
  const std::size_t first = S + 1 > K ? S + 1 - K : 0;
  report.first_window_gd = st.ds.epoch() + static_cast<std::int64_t>(first);
  report.window = marginal_window(st.factors(), first, S);
  report.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  report.fp_iters = fp.iterations;
  report.zero_slab = fp.zero_slab;
  report.residual = bp.residual;
  return report;
}

std::vector<ArrivalReport> track(TrackerState& st, std::span<const UpdateEvent> stream) {
  for (std::size_t n = 1; n < stream.size(); ++n) {
    if (stream[n].ld < stream[n - 1].ld) {
      throw StreamError("record " + std::to_string(n + 1) + ": loading date " +
                        std::to_string(stream[n].ld) + " after " + std::to_string(stream[n - 1].ld));
    }
  }
  if (!stream.empty() && stream.front().ld <= st.ds.horizon()) {
    throw StreamError("loading date " + std::to_string(stream.front().ld) +
                      " was already folded into the tracker");
  }
  std::vector<ArrivalReport> reports;
  std::size_t at = 0;
  const std::int64_t last = stream.empty() ? st.ds.horizon() : stream.back().ld;
  for (std::int64_t ld = st.ds.horizon() + 1; ld <= last; ++ld) {
    std::size_t end = at;
    while (end < stream.size() && stream[end].ld == ld) ++end;
    reports.push_back(arrive(st, stream.subspan(at, end - at), ld));
    at = end;
  }
  return reports;
}

}  // namespace mvtc
