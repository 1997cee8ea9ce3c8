#include "mvtc/experiment.hpp"

#include "mvtc/config.hpp"
#include "mvtc/errors.hpp"
#include "mvtc/kernels.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <random>

namespace mvtc {
namespace {

using Clock = std::chrono::steady_clock;
using json = nlohmann::json;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<std::pair<std::int64_t, ScoreReport>> score_by_gd(const std::vector<CellValue>& est,
                                                              const std::vector<CellValue>& truth) {
  std::map<std::int64_t, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (std::size_t n = 0; n < truth.size(); ++n) {
    auto& g = groups[truth[n].gd];
    g.first.push_back(est[n].value);
    g.second.push_back(truth[n].value);
  }
  std::vector<std::pair<std::int64_t, ScoreReport>> out;
  for (const auto& [gd, g] : groups) out.emplace_back(gd, score(g.first, g.second));
  return out;
}

MethodScore method_score(std::string name, const Tensor3& estimate, std::int64_t epoch,
                         const std::vector<CellValue>& truth) {
  MethodScore m;
  m.method = std::move(name);
  m.estimates = cells_for(estimate, epoch, truth);
  m.overall = score_cells(m.estimates, truth);
  m.per_gd = score_by_gd(m.estimates, truth);
  return m;
}

// Dense truth lookup for (gd, location, feature); NaN where absent.
class TruthGrid {
 public:
  TruthGrid(const std::vector<CellValue>& cells, std::size_t I, std::size_t J, std::int64_t epoch)
      : I_(I), J_(J), epoch_(epoch) {
    std::int64_t last = epoch - 1;
    for (const auto& c : cells) last = std::max(last, c.gd);
    slabs_ = static_cast<std::size_t>(last - epoch + 1);
    values_.assign(slabs_ * I * J, std::numeric_limits<double>::quiet_NaN());
    for (const auto& c : cells) {
      if (c.gd < epoch || c.location >= I || c.feature >= J) {
        throw ArgumentError("truth cell (gd " + std::to_string(c.gd) + ", location " +
                            std::to_string(c.location) + ", feature " + std::to_string(c.feature) +
                            ") outside the dataset");
      }
      values_[at(c.gd, c.location, c.feature)] = c.value;
    }
  }

  /// All I*J truth values of one GD, location fastest.
  std::vector<double> slab(std::int64_t gd) const {
    if (gd < epoch_ || static_cast<std::size_t>(gd - epoch_) >= slabs_) {
      throw ArgumentError("no truth for gd " + std::to_string(gd));
    }
    std::vector<double> out(I_ * J_);
    for (std::size_t j = 0; j < J_; ++j)
      for (std::size_t i = 0; i < I_; ++i) {
        const double v = values_[at(gd, i, j)];
        if (std::isnan(v)) {
          throw ArgumentError("no truth for gd " + std::to_string(gd) + ", location " +
                              std::to_string(i) + ", feature " + std::to_string(j));
        }
        out[i + I_ * j] = v;
      }
    return out;
  }

 private:
  std::size_t at(std::int64_t gd, std::size_t i, std::size_t j) const {
    return i + I_ * (j + J_ * static_cast<std::size_t>(gd - epoch_));
  }
  std::size_t I_, J_;
  std::int64_t epoch_;
  std::size_t slabs_ = 0;
  std::vector<double> values_;
};

std::span<const double> slab_of(const Tensor3& z, std::size_t s) {
  return z.values().subspan(s * z.I() * z.J(), z.I() * z.J());
}

DynamicSummary summarize(const std::vector<ArrivalScore>& arrivals, bool online) {
  std::vector<double> rmse, mae, rel, secs;
  for (const auto& a : arrivals) {
    const auto& scores = online ? a.online : a.batch;
    for (const auto& [gd, r] : scores) {
      rmse.push_back(r.rmse);
      mae.push_back(r.mae);
      rel.push_back(r.relative_rmse);
    }
    if (online || !scores.empty()) secs.push_back(online ? a.online_seconds : a.batch_seconds);
  }
  return {mean_std(rmse), mean_std(mae), mean_std(rel), mean_std(secs)};
}

json matrix_rows(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix rows_matrix(const json& rows, const char* name) {
  if (!rows.is_array()) throw ArgumentError(std::string("factor ") + name + " must be an array");
  const auto n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index F = n ? static_cast<Eigen::Index>(rows[0].size()) : 0;
  Matrix m(n, F);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != F) {
      throw ArgumentError(std::string("factor ") + name + " has ragged rows");
    }
    for (Eigen::Index c = 0; c < F; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

}  // namespace

std::vector<CellValue> cells_for(const Tensor3& estimate, std::int64_t epoch,
                                 const std::vector<CellValue>& truth) {
  std::vector<CellValue> out;
  out.reserve(truth.size());
  for (const auto& c : truth) {
    if (c.gd < epoch || static_cast<std::size_t>(c.gd - epoch) >= estimate.S() ||
        c.location >= estimate.I() || c.feature >= estimate.J()) {
      throw ArgumentError("truth cell (gd " + std::to_string(c.gd) + ", location " +
                          std::to_string(c.location) + ", feature " + std::to_string(c.feature) +
                          ") outside the estimate");
    }
    out.push_back({c.location, c.feature, c.gd,
                   estimate(c.location, c.feature, static_cast<std::size_t>(c.gd - epoch))});
  }
  return out;
}

StaticReport run_static(const MultiVersionDataset& ds, const LocationGraph& graph,
                        const std::vector<CellValue>& truth, const SolverConfig& config,
                        bool with_ablation) {
  StaticReport report;
  report.methods.push_back(method_score("naive", naive_estimate(ds), ds.epoch(), truth));
  report.mtc = fit(ds, graph, config);
  report.methods.push_back(method_score("mtc", report.mtc.hybrid, ds.epoch(), truth));
  if (with_ablation) {
    SolverConfig plain = config;
    plain.rho_A = 0.0;
    plain.rho = 0.0;
    report.ablation = fit(ds, graph, plain);
    report.methods.push_back(
        method_score("mtc_unregularized", report.ablation.hybrid, ds.epoch(), truth));
  }
  return report;
}

DynamicReport run_dynamic(std::span<const UpdateEvent> events, const IngestOptions& start,
                          std::int64_t final_horizon, const std::vector<CellValue>& truth,
                          const LocationGraph& graph, const DynamicOptions& options) {
  if (final_horizon < start.horizon) throw ArgumentError("final horizon precedes the start");
  std::vector<UpdateEvent> initial, stream;
  for (const auto& e : events) {
    if (e.ld <= start.horizon) {
      initial.push_back(e);
    } else if (e.ld <= final_horizon) {
      stream.push_back(e);
    }
  }
  std::stable_sort(stream.begin(), stream.end(),
                   [](const UpdateEvent& a, const UpdateEvent& b) { return a.ld < b.ld; });
  const MultiVersionDataset ds0 = ingest(initial, start);
  const TruthGrid grid(truth, start.I, start.J, start.epoch);

  DynamicReport report;
  const auto t0 = Clock::now();
  TrackerState state = start_tracker(ds0, graph, options.tracker);
  report.initial_fit_seconds = seconds_since(t0);

  std::size_t at = 0;
  for (std::int64_t ld = start.horizon + 1; ld <= final_horizon; ++ld) {
    std::size_t end = at;
    while (end < stream.size() && stream[end].ld == ld) ++end;
    const ArrivalReport arrival =
        arrive(state, std::span<const UpdateEvent>(stream).subspan(at, end - at), ld);
    at = end;

    ArrivalScore a;
    a.ld = ld;
    a.online_seconds = arrival.seconds;
    a.fp_iters = arrival.fp_iters;
    a.residual = arrival.residual;
    a.online_estimates = tensor_cells(arrival.window, arrival.first_window_gd, 0, arrival.window.S());
    const std::size_t W = arrival.window.S();
    for (std::size_t w = 0; w < W; ++w) {
      const std::int64_t gd = arrival.first_window_gd + static_cast<std::int64_t>(w);
      if (options.first_appearance_only && gd != ld) continue;
      a.online.emplace_back(gd, score(slab_of(arrival.window, w), grid.slab(gd)));
    }
    if (options.batch_restart) {
      const auto tb = Clock::now();
      const FitResult batch = fit(state.ds, graph, options.tracker.solver);
      a.batch_seconds = seconds_since(tb);
      const std::size_t first = static_cast<std::size_t>(arrival.first_window_gd - state.ds.epoch());
      for (std::size_t w = 0; w < W; ++w) {
        const std::int64_t gd = arrival.first_window_gd + static_cast<std::int64_t>(w);
        if (options.first_appearance_only && gd != ld) continue;
        a.batch.emplace_back(gd, score(slab_of(batch.estimate, first + w), grid.slab(gd)));
      }
    }
    report.arrivals.push_back(std::move(a));
  }
  report.online = summarize(report.arrivals, true);
  report.batch = summarize(report.arrivals, false);
  return report;
}

// ---------------------------------------------------------------------------

std::vector<std::vector<double>> column_norms(const FactorSet& theta) {
  std::vector<std::vector<double>> out;
  for (int mode = 1; mode <= 4; ++mode) {
    const Matrix& m = theta.factor(mode);
    std::vector<double> norms(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) norms[static_cast<std::size_t>(c)] = m.col(c).norm();
    out.push_back(std::move(norms));
  }
  return out;
}

ColumnMatch match_columns(const FactorSet& est, const FactorSet& ref) {
  est.check_rank();
  ref.check_rank();
  if (!(est.dims() == ref.dims())) throw ArgumentError("factor sets have different shapes");
  const std::size_t Fe = est.rank(), Fr = ref.rank();
  Matrix cong = Matrix::Ones(static_cast<Eigen::Index>(Fe), static_cast<Eigen::Index>(Fr));
  for (int mode = 1; mode <= 4; ++mode) {
    const Matrix& a = est.factor(mode);
    const Matrix& b = ref.factor(mode);
    for (Eigen::Index f = 0; f < a.cols(); ++f)
      for (Eigen::Index g = 0; g < b.cols(); ++g) {
        const double denom = a.col(f).norm() * b.col(g).norm();
        cong(f, g) *= denom > 0.0 ? a.col(f).dot(b.col(g)) / denom : 0.0;
      }
  }
  ColumnMatch out;
  out.perm.assign(Fr, SIZE_MAX);
  out.congruence.assign(Fr, 0.0);
  std::vector<bool> used_e(Fe, false), used_r(Fr, false);
  for (std::size_t round = 0; round < std::min(Fe, Fr); ++round) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t bf = 0, bg = 0;
    for (std::size_t f = 0; f < Fe; ++f)
      for (std::size_t g = 0; g < Fr; ++g) {
        if (used_e[f] || used_r[g]) continue;
        const double c = cong(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(g));
        if (c > best) {
          best = c;
          bf = f;
          bg = g;
        }
      }
    used_e[bf] = used_r[bg] = true;
    out.perm[bg] = bf;
    out.congruence[bg] = best;
  }
  double sum = 0.0;
  for (double c : out.congruence) sum += c;
  out.mean_congruence = Fr ? sum / static_cast<double>(Fr) : 0.0;
  return out;
}

std::string export_factors_json(const FactorSet& theta, const SolverConfig& config,
                                const std::vector<double>& objective_trace) {
  theta.check_rank();
  const Dims4 d = theta.dims();
  json doc;
  doc["dims"] = {{"I", d.I}, {"J", d.J}, {"K", d.K}, {"S", d.S}};
  doc["rank"] = theta.rank();
  doc["factors"] = {{"A", matrix_rows(theta.A)},
                    {"B", matrix_rows(theta.B)},
                    {"C", matrix_rows(theta.C)},
                    {"D", matrix_rows(theta.D)}};
  json cfg = json::object();
  for (const auto& [k, v] : solver_keys(config)) cfg[k] = v;
  doc["config"] = std::move(cfg);
  doc["seed"] = config.seed;
  doc["objective_trace"] = objective_trace;
  const auto norms = column_norms(theta);
  doc["column_norms"] = {{"A", norms[0]}, {"B", norms[1]}, {"C", norms[2]}, {"D", norms[3]}};
  return doc.dump(2);
}

FactorSet import_factors_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ArgumentError(std::string("factor JSON: ") + e.what());
  }
  if (!doc.contains("factors")) throw ArgumentError("factor JSON lacks 'factors'");
  const json& f = doc["factors"];
  FactorSet th;
  th.A = rows_matrix(f.at("A"), "A");
  th.B = rows_matrix(f.at("B"), "B");
  th.C = rows_matrix(f.at("C"), "C");
  th.D = rows_matrix(f.at("D"), "D");
  th.check_rank();
  return th;
}

// ---------------------------------------------------------------------------

double bench_iteration(const Dims4& dims, std::size_t rank, std::size_t iters, std::uint64_t seed) {
  if (dims.size() == 0 || rank == 0 || iters == 0) throw ArgumentError("empty benchmark instance");
  if (dims.S < dims.K) throw ArgumentError("benchmark needs S >= K");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor4 X(dims);
  for (auto& v : X.values()) v = u(rng);
  std::vector<Edge> chain;
  for (std::size_t i = 0; i + 1 < dims.I; ++i) chain.push_back({i, i + 1, 1.0});
  const CompletionProblem problem(
      std::move(X), age_mask(dims, 0, static_cast<std::int64_t>(dims.S) - 1),
      build_weighting(0.7, dims.S, dims.K), LocationGraph::from_edges(dims.I, chain).laplacian(),
      0.01, 0.01);
  auto draw = [&](std::size_t rows) {
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(rank));
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = u(rng);
    return m;
  };
  SolverConfig cfg;
  cfg.rank = rank;
  SolverState st;
  st.theta = {draw(dims.I), draw(dims.J), draw(dims.K), draw(dims.S)};
  st.previous = st.theta;
  impute(problem, st.theta, st.Y);
  std::vector<double> times;
  for (std::size_t it = 0; it <= iters; ++it) {
    const auto t0 = Clock::now();
    const MomentumStep m = momentum_step(st.e);
    st.e = m.e;
    st.nu = m.nu;
    sweep(st, problem, cfg);
    impute(problem, st.theta, st.Y);
    if (it > 0) times.push_back(seconds_since(t0));  // first pass warms caches
  }
  std::nth_element(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(times.size() / 2),
                   times.end());
  return times[times.size() / 2];
}

std::vector<BenchPoint> bench_scaling(const Dims4& base, std::size_t rank, std::size_t iters,
                                      std::uint64_t seed) {
  std::vector<BenchPoint> out;
  out.push_back({"base", 0, bench_iteration(base, rank, iters, seed)});
  Dims4 d = base;
  d.I *= 2;
  out.push_back({"I", d.I, bench_iteration(d, rank, iters, seed)});
  d = base;
  d.S *= 2;
  out.push_back({"S", d.S, bench_iteration(d, rank, iters, seed)});
  out.push_back({"F", 2 * rank, bench_iteration(base, 2 * rank, iters, seed)});
  return out;
}

}  // namespace mvtc
