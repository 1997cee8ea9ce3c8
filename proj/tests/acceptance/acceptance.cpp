// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 when
// any criterion fails. Tolerances and sizes are fixed here, not tuned per run.

#include "support.hpp"

#include "mvtc/errors.hpp"
#include "mvtc/experiment.hpp"
#include "mvtc/kernels.hpp"
#include "mvtc/metrics.hpp"
#include "mvtc/synth.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <cstdlib>
#include <map>
#include <set>
#include <string>

using namespace mvtc;
using namespace mvtc::testing;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

char buf[512];

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

IngestOptions options_for(const GeneratorConfig& g, std::int64_t horizon) {
  IngestOptions o;
  o.I = g.I;
  o.J = g.J;
  o.K = g.K;
  o.horizon = horizon;
  return o;
}

// 1 -------------------------------------------------------------------------
Outcome kernels() {
  Rng rng(1001);
  const int instances = 120;
  double worst = 0.0;
  for (int n = 0; n < instances; ++n) {
    const Dims4 d = random_dims(rng, 4);
    const std::size_t F = uniform_int(rng, 1, 4);
    const Tensor4 t = random_tensor(rng, d);
    const FactorSet th = random_factors(rng, d, F, -1.0, 1.0);
    for (int mode = 1; mode <= 4; ++mode) {
      worst = std::max(worst, rel_err(unfold(t, mode), ref_unfold(t, mode)));
      std::vector<Matrix> others;
      for (int m = 1; m <= 4; ++m)
        if (m != mode) others.push_back(th.factor(m));
      worst = std::max(worst, rel_err(mttkrp(t, others, mode), ref_mttkrp(t, th, mode)));
    }
    const std::vector<Matrix> kr_in{th.B, th.C, th.D};
    worst = std::max(worst, rel_err(khatri_rao(kr_in), ref_khatri_rao(kr_in)));
    worst = std::max(worst, rel_err(reconstruct(th), ref_reconstruct(th)));
    const ObservationMask m = random_mask(rng, d);
    for (bool inside : {true, false}) {
      const Tensor4 got = project_mask(t, m, inside ? Keep::kInside : Keep::kOutside);
      worst = std::max(worst, rel_err(got, ref_project_mask(t, m, inside)));
    }
  }
  return {worst <= 1e-12, fmt("%d instances, max relative error %.2e (tol 1e-12)", instances, worst)};
}

// 2 -------------------------------------------------------------------------
Outcome gradients() {
  Rng rng(2002);
  const Dims4 d{3, 2, 2, 3};
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const CompletionProblem p(random_tensor(rng, d, 0.0, 1.0), random_mask(rng, d),
                              build_weighting(0.7, d.S, d.K), random_graph(rng, d.I).laplacian(), 0.3, 0.2);
    const FactorSet th = random_factors(rng, d, 2, 0.2, 1.0);
    const Tensor4 Y = impute_Y(p, th);
    for (int mode = 1; mode <= 4; ++mode) {
      auto f = [&](const Matrix& M) {
        FactorSet probe = th;
        probe.factor(mode) = M;
        Tensor4 scratch;
        return impute(p, probe, scratch);
      };
      worst = std::max(worst, rel_err(gradient(p, th, Y, mode), finite_difference(f, th.factor(mode))));
    }
  }
  return {worst <= 1e-5, fmt("3x2x2x3, F=2, 5 instances x 4 factors, max relative error %.2e (tol 1e-5)", worst)};
}

// Small noiseless in-model instance for the convergence runs.
MultiVersionDataset small_instance(std::uint64_t seed) {
  GeneratorConfig g;
  g.I = 6;
  g.J = 4;
  g.K = 3;
  g.S = 12;
  g.F = 2;
  g.seed = seed;
  g.noise_scale = 0.1;
  const Tensor4 x = split_updates(gen_ground_truth(g).totals, g);
  return ingest(emit_events(x, 11, 3).events, options_for(g, 11));
}

// 3 -------------------------------------------------------------------------
// With B unregularized, any rho > 0 makes the objective strictly decrease
// along A, C, D -> 0, B -> infinity with the fit unchanged, so no stationary
// point exists and the residual only decays like 1/sqrt(iterations).
// Monotonicity is checked with and without regularizers; stationarity on the
// unregularized objective, where minimizers exist. The regularized residual
// is reported for reference.
Outcome convergence() {
  double worst_rise = 0.0, worst_residual = 0.0, regularized_residual = 0.0;
  std::size_t monotone = 0, stationary = 0;
  Rng rng(3003);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const MultiVersionDataset ds = small_instance(seed);
    const LocationGraph g = random_graph(rng, ds.I());
    bool all_monotone = true;
    for (const double rho : {0.01, 0.0}) {
      SolverConfig plain;
      plain.rho_A = plain.rho = rho;
      plain.momentum = Momentum::kNone;
      plain.max_outer_iters = 500;
      plain.tol_rel_obj = 1e-300;
      plain.tol_station = 1e-300;
      plain.seed = seed;
      const auto& tr = fit(ds, g, plain).diagnostics.objective_trace;
      double rise = 0.0;
      for (std::size_t n = 1; n < tr.size(); ++n) rise = std::max(rise, tr[n] - tr[n - 1]);
      worst_rise = std::max(worst_rise, rise);
      // A trace cut short means the objective stopped changing exactly.
      all_monotone = all_monotone && rise <= 1e-10;
    }
    if (all_monotone) ++monotone;

    SolverConfig fast;
    fast.rho_A = fast.rho = 0.0;
    fast.max_outer_iters = 20000;
    fast.tol_rel_obj = 1e-300;
    fast.tol_station = 1e-9;
    fast.seed = seed;
    const FitResult b = fit(ds, g, fast);
    worst_residual = std::max(worst_residual, b.diagnostics.final_residual);
    if (b.diagnostics.final_residual <= 1e-6) ++stationary;

    SolverConfig reg = fast;
    reg.rho_A = reg.rho = 0.01;
    reg.max_outer_iters = 2000;
    regularized_residual = std::max(regularized_residual, fit(ds, g, reg).diagnostics.final_residual);
  }
  return {monotone == 20 && stationary == 20,
          fmt("momentum off: %zu/20 non-increasing over 500 iterations, rho in {0.01, 0} (max rise %.2e, "
              "slack 1e-10); momentum on, rho = 0: %zu/20 with residual <= 1e-6 (max %.2e); "
              "rho = 0.01 has no minimizer, residual after 2000 iterations %.2e",
              monotone, worst_rise, stationary, worst_residual, regularized_residual)};
}

// 4 -------------------------------------------------------------------------
Outcome recovery() {
  GeneratorConfig g;
  g.I = 10;
  g.J = 10;
  g.K = 3;
  g.S = 30;
  g.F = 2;
  g.seed = 4004;
  g.fractions = {0.6, 0.3, 0.1};
  const Tensor4 x = split_updates(gen_ground_truth(g).totals, g);
  const EmittedData em = emit_events(x, 29, 3);
  const MultiVersionDataset ds = ingest(em.events, options_for(g, 29));
  const StaticReport r = run_static(ds, LocationGraph(10), em.withheld, SolverConfig{}, false);
  const MethodScore& naive = r.methods[0];
  const MethodScore& mtc = r.methods[1];
  const double mtc_rel = mtc.overall.relative_rmse;
  // GD 28 lacks its third update (0.1 missing), GD 29 its second and third (0.4).
  const double short28 = naive.per_gd.at(0).second.relative_rmse;
  const double short29 = naive.per_gd.at(1).second.relative_rmse;
  const bool ok = mtc_rel <= 1e-2 && std::abs(short28 - 0.1) <= 1e-10 && std::abs(short29 - 0.4) <= 1e-10;
  return {ok, fmt("MTC relative RMSE %.3e (tol 1e-2); naive shortfall %.12f / %.12f (want 0.1 / 0.4 within 1e-10)",
                  mtc_rel, short28, short29)};
}

// 5 -------------------------------------------------------------------------
Outcome ablation() {
  std::size_t wins = 0;
  double sum_reg = 0.0, sum_plain = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    GeneratorConfig g;
    g.I = 20;
    g.J = 5;
    g.K = 3;
    g.S = 30;
    g.F = 2;
    g.seed = 5000 + seed;
    g.noise_scale = 0.3;
    g.communities = 4;
    g.community_spread = 0.05;
    g.factor_smoothness = true;
    const GroundTruth gt = gen_ground_truth(g);
    const Tensor4 x = split_updates(gt.totals, g);
    const EmittedData em = emit_events(x, 29, 3);
    const MultiVersionDataset ds = ingest(em.events, options_for(g, 29));
    // The boundary rows of the second-difference operator also shrink
    // magnitudes, so the smoothness weight stays small.
    SolverConfig cfg;
    cfg.rho_A = 0.1;
    cfg.rho = 1e-3;
    cfg.seed = seed;
    const StaticReport r = run_static(ds, gt.graph, em.withheld, cfg, true);
    const double reg = r.methods[1].overall.rmse, plain = r.methods[2].overall.rmse;
    sum_reg += reg;
    sum_plain += plain;
    if (reg <= plain) ++wins;
  }
  return {wins >= 14, fmt("rho_A = 0.1, rho = 1e-3: regularized <= unregularized on %zu/20 seeds (need 14); mean RMSE %.4e vs %.4e",
                          wins, sum_reg / 20, sum_plain / 20)};
}

// 6 -------------------------------------------------------------------------
Outcome online() {
  GeneratorConfig g;
  g.I = 20;
  g.J = 20;
  g.K = 3;
  g.S = 60;
  g.F = 3;
  g.seed = 6006;
  g.noise_scale = 0.1;
  const Tensor4 x = split_updates(gen_ground_truth(g).totals, g);
  const EmittedData em = emit_events(x, 59, 3);
  DynamicOptions opt;
  opt.tracker.solver.rank = 3;
  const DynamicReport r = run_dynamic(em.events, options_for(g, 29), 59, truth_cells(x), LocationGraph(20), opt);
  const double ratio = r.online.rmse.mean / r.batch.rmse.mean;
  const double speedup = r.batch.seconds.mean / r.online.seconds.mean;
  return {r.arrivals.size() == 30 && ratio <= 1.2 && speedup >= 5.0,
          fmt("%zu arrivals; online/batch aggregate RMSE %.3f (tol 1.2); per-arrival speedup %.1fx (need 5x)",
              r.arrivals.size(), ratio, speedup)};
}

// 7 -------------------------------------------------------------------------
Outcome scaling() {
  const Dims4 base{64, 16, 4, 64};
  // Median of 10 iterations per point; best of three repetitions against
  // scheduler noise on a shared machine.
  auto measure = [&](const Dims4& d, std::size_t F) {
    double best = 1e300;
    for (int rep = 0; rep < 3; ++rep) best = std::min(best, bench_iteration(d, F, 10, 7007));
    return best;
  };
  const double t0 = measure(base, 8);
  Dims4 di = base, ds = base;
  di.I *= 2;
  ds.S *= 2;
  const double ri = measure(di, 8) / t0, rs = measure(ds, 8) / t0, rf = measure(base, 16) / t0;
  return {ri <= 2.3 && rs <= 2.3 && rf <= 2.3,
          fmt("base %.2f ms/iter; growth I x2 %.2f, S x2 %.2f, F x2 %.2f (tol 2.3)", t0 * 1e3, ri, rs, rf)};
}

// 8 -------------------------------------------------------------------------
Outcome invariants() {
  Rng rng(8008);
  std::size_t checks = 0, failures = 0;
  std::map<std::string, std::size_t> failed_by;
  const char* group = "";
  auto expect = [&](bool ok) {
    ++checks;
    if (!ok) {
      ++failures;
      ++failed_by[group];
    }
  };

  // Mask and loss split agree on which slabs are fully observed.
  group = "mask/loss split";
  for (int n = 0; n < 200; ++n) {
    const std::size_t K = uniform_int(rng, 1, 5), S = uniform_int(rng, K, 12);
    const ObservationMask m = age_mask({2, 2, K, S}, 0, static_cast<std::int64_t>(S) - 1);
    const auto w = build_weighting(0.7, S, K);
    for (std::size_t s = 0; s < S; ++s) expect(m.gd_fully_observed(s) == (w[s] == 0.7));
  }

  // Imputation identity and nonnegativity after every block update.
  group = "imputation/nonnegativity";
  for (int n = 0; n < 20; ++n) {
    const Dims4 d{uniform_int(rng, 2, 5), uniform_int(rng, 2, 4), uniform_int(rng, 1, 3), uniform_int(rng, 3, 6)};
    const CompletionProblem p(random_tensor(rng, d, 0.0, 1.0), random_mask(rng, d), build_weighting(0.7, d.S, d.K),
                              random_graph(rng, d.I).laplacian(), 0.1, 0.1);
    SolverConfig cfg;
    SolverState st;
    st.theta = random_factors(rng, d, uniform_int(rng, 1, 3));
    st.previous = st.theta;
    impute(p, st.theta, st.Y);
    for (int it = 0; it < 30; ++it) {
      const MomentumStep m = momentum_step(st.e);
      st.e = m.e;
      st.nu = m.nu;
      for (int mode = 1; mode <= 4; ++mode) {
        update_factor(mode, st, p, cfg);
        expect(st.theta.factor(mode).minCoeff() >= 0.0);
      }
      impute(p, st.theta, st.Y);
      expect(project_mask(st.Y, p.mask(), Keep::kInside) == project_mask(p.data(), p.mask(), Keep::kInside));
    }
  }

  // Conservation of totals in the generator, with and without jitter.
  group = "conservation";
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    GeneratorConfig g;
    g.I = 5;
    g.J = 4;
    g.S = 10;
    g.K = 1 + seed % 4;
    g.seed = seed;
    g.noise_scale = seed % 2 ? 0.4 : 0.0;
    if (seed % 5 == 0) g.concentration.assign(g.K, 1.0);
    const GroundTruth gt = gen_ground_truth(g);
    const Tensor4 x = split_updates(gt.totals, g);
    for (std::size_t s = 0; s < g.S; ++s)
      for (std::size_t j = 0; j < g.J; ++j)
        for (std::size_t i = 0; i < g.I; ++i) {
          double sum = 0.0;
          for (std::size_t k = 0; k < g.K; ++k) sum += x(i, j, k, s);
          expect(sum == gt.totals(i, j, s));
        }
  }

  // Determinism under a fixed seed, end to end.
  group = "determinism";
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto run = [&] {
      GeneratorConfig g;
      g.seed = seed;
      g.noise_scale = 0.2;
      const Tensor4 x = split_updates(gen_ground_truth(g).totals, g);
      const EmittedData em = emit_events(x, 29, 3);
      SolverConfig cfg;
      cfg.seed = seed;
      cfg.max_outer_iters = 50;
      return std::make_pair(em.events, fit(ingest(em.events, options_for(g, 29)), LocationGraph(), cfg).estimate);
    };
    const auto a = run(), b = run();
    expect(a.first == b.first);
    expect(a.second == b.second);
  }
  std::string where;
  for (const auto& [name, n] : failed_by) where += " " + name + "=" + std::to_string(n);
  return {failures == 0, fmt("%zu property checks, %zu failures%s", checks, failures, where.c_str())};
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "kernel oracle equivalence", 10, kernels},
      {2, "gradient correctness", 10, gradients},
      {3, "monotone convergence and stationarity", 120, convergence},
      {4, "exact recovery at desk scale", 60, recovery},
      {5, "regularization ablation ordering", 300, ablation},
      {6, "online tracking quality", 300, online},
      {7, "per-iteration complexity scaling", 180, scaling},
      {8, "invariant suite", 60, invariants},
  };
  int failed = 0;
  // Optional arguments select criteria by number.
  std::set<int> only;
  for (int a = 1; a < argc; ++a) only.insert(std::atoi(argv[a]));
  std::size_t ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    ++ran;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    const bool in_time = secs <= c.limit_seconds;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("[%s] %d [PRIMARY] %s: %s; %.1f s (limit %.0f s)\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.limit_seconds);
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", ran - static_cast<std::size_t>(failed), ran);
  return failed == 0 ? 0 : 1;
}
