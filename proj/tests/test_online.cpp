#include "doctest.h"
#include "support.hpp"

#include "mvtc/errors.hpp"
#include "mvtc/kernels.hpp"
#include "mvtc/online.hpp"
#include "mvtc/synth.hpp"

using namespace mvtc;
using namespace mvtc::testing;

namespace {

// Tracker whose dataset is the exact model of `theta` on slabs [0, S0),
// with options K and the age mask of horizon S0 - 1.
struct Planted {
  FactorSet theta;  // S0 + 1 rows of D; the last row is the one to recover
  TrackerState st;
  MultiVersionDataset next;
};

Planted planted(Rng& rng, std::size_t K, std::size_t S0, double rho) {
  Planted p;
  const Dims4 full{4, 3, K, S0 + 1};
  p.theta = random_factors(rng, full, 2, 0.3, 1.0);
  const Tensor4 X = reconstruct(p.theta);
  IngestOptions o;
  o.I = 4;
  o.J = 3;
  o.K = K;
  o.horizon = static_cast<std::int64_t>(S0);
  const Dims4 d1 = full;
  p.next = MultiVersionDataset(o, X, age_mask(d1, 0, o.horizon));
  o.horizon -= 1;
  const Dims4 d0{4, 3, K, S0};
  Tensor4 X0(d0, std::vector<double>(X.values().begin(), X.values().begin() + static_cast<std::ptrdiff_t>(d0.size())));
  const ObservationMask m0 = age_mask(d0, 0, o.horizon);
  p.st.ds = MultiVersionDataset(o, project_mask(X0, m0, Keep::kInside), m0);
  p.st.theta = p.theta;
  p.st.theta.D.conservativeResize(static_cast<Eigen::Index>(S0), Eigen::NoChange);
  p.st.graph = LocationGraph(4);
  p.st.config.fp_iters = 20000;
  p.st.config.fp_tol = 1e-15;
  p.st.config.solver.rho_A = 0.0;
  p.st.config.solver.rho = rho;
  return p;
}

struct Stream {
  std::vector<UpdateEvent> events;
  IngestOptions start;
  GeneratorConfig gen;
};

Stream noiseless_stream(std::uint64_t seed) {
  Stream s;
  s.gen.I = 8;
  s.gen.J = 6;
  s.gen.K = 3;
  s.gen.S = 30;
  s.gen.F = 2;
  s.gen.seed = seed;
  s.gen.fractions = {0.6, 0.3, 0.1};
  s.events = emit_events(split_updates(gen_ground_truth(s.gen).totals, s.gen), 29, 3).events;
  s.start.I = 8;
  s.start.J = 6;
  s.start.K = 3;
  s.start.horizon = 14;
  return s;
}

std::pair<std::vector<UpdateEvent>, std::vector<UpdateEvent>> split_at(const std::vector<UpdateEvent>& ev,
                                                                       std::int64_t horizon) {
  std::vector<UpdateEvent> head, tail;
  for (const auto& e : ev) (e.ld <= horizon ? head : tail).push_back(e);
  return {head, tail};
}

double observed_error(const MultiVersionDataset& ds, const FactorSet& th) {
  const Tensor4 model = project_mask(reconstruct(th), ds.mask(), Keep::kInside);
  return rel_err(model, project_mask(ds.update_tensor(), ds.mask(), Keep::kInside));
}

}  // namespace

TEST_CASE("forward step recovers a planted row") {
  Rng rng(61);
  Planted p = planted(rng, 1, 5, 0.0);
  FpInfo info;
  const Vector d = fp_step(p.st, p.next, &info);
  CHECK((d - p.theta.D.row(5).transpose()).norm() <= 1e-6);
  CHECK_FALSE(info.zero_slab);

  // Newest GD with only its first update observed.
  Planted q = planted(rng, 3, 6, 0.0);
  CHECK((fp_step(q.st, q.next) - q.theta.D.row(6).transpose()).norm() <= 1e-6);
}

TEST_CASE("forward step on an empty slab appends zeros") {
  Rng rng(62);
  Planted p = planted(rng, 2, 4, 0.0);
  Tensor4 X = p.next.update_tensor();
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t i = 0; i < 4; ++i) X(i, j, k, 4) = 0.0;
  const MultiVersionDataset next(p.next.options(), X, p.next.mask());
  FpInfo info;
  CHECK(fp_step(p.st, next, &info).isZero(0.0));
  CHECK(info.zero_slab);
}

TEST_CASE("a stationary arrival is a fixed point") {
  Rng rng(63);
  Planted p = planted(rng, 3, 6, 0.0);
  const Vector d = fp_step(p.st, p.next);
  BpInfo info;
  bp_step(p.st, p.next, d, &info);
  for (int mode = 1; mode <= 4; ++mode)
    CHECK((p.st.theta.factor(mode) - p.theta.factor(mode)).norm() <= 1e-6);
  CHECK(p.st.ds.S() == 7);
}

TEST_CASE("tracking keeps shapes and nonnegativity") {
  const Stream s = noiseless_stream(1);
  auto [head, tail] = split_at(s.events, 14);
  TrackerConfig cfg;
  TrackerState st = start_tracker(ingest(head, s.start), LocationGraph(8), cfg);
  const Matrix A0 = st.theta.A;
  const auto reports = track(st, tail);
  CHECK(reports.size() == 15);
  CHECK(st.theta.D.rows() == 30);
  CHECK(st.theta.A.rows() == A0.rows());
  CHECK(st.theta.B.rows() == 6);
  CHECK(st.theta.C.rows() == 3);
  CHECK(st.theta.nonnegative());
  for (const auto& r : reports) {
    CHECK(r.window.S() == 2);
    CHECK(r.first_window_gd == r.ld - 1);
  }
}

TEST_CASE("streaming replay fits about as well as a batch fit") {
  const Stream s = noiseless_stream(2);
  auto [head, tail] = split_at(s.events, 14);
  TrackerConfig cfg;
  TrackerState st = start_tracker(ingest(head, s.start), LocationGraph(8), cfg);
  track(st, tail);
  IngestOptions final_opts = s.start;
  final_opts.horizon = 29;
  const auto ds = ingest(s.events, final_opts);
  const FitResult batch = fit(ds, LocationGraph(8), cfg.solver);
  CHECK(observed_error(ds, st.factors()) <= 2.0 * observed_error(ds, batch.theta) + 1e-3);
}

TEST_CASE("empty arrivals append zero GD rows") {
  const Stream s = noiseless_stream(3);
  auto [head, tail] = split_at(s.events, 14);
  TrackerConfig cfg;
  cfg.solver.rho = 0.0;
  TrackerState st = start_tracker(ingest(head, s.start), LocationGraph(8), cfg);
  for (std::int64_t ld = 15; ld < 18; ++ld) {
    const ArrivalReport r = arrive(st, {}, ld);
    CHECK(r.zero_slab);
    CHECK(st.theta.D.row(st.theta.D.rows() - 1).isZero(0.0));
  }
}

TEST_CASE("stream ordering errors") {
  const Stream s = noiseless_stream(4);
  auto [head, tail] = split_at(s.events, 14);
  TrackerState st = start_tracker(ingest(head, s.start), LocationGraph(8), TrackerConfig{});
  CHECK_THROWS_AS(arrive(st, {}, 16), StreamError);
  CHECK_THROWS_AS(arrive(st, {}, 14), StreamError);
  std::vector<UpdateEvent> swapped{tail[0], tail[0]};
  swapped[0].ld = 16;
  swapped[1].ld = 15;
  CHECK_THROWS_AS(track(st, swapped), StreamError);
  std::vector<UpdateEvent> stale{head.back()};
  CHECK_THROWS_AS(track(st, stale), StreamError);
  std::vector<UpdateEvent> mixed{tail[0]};
  mixed[0].ld = 16;
  CHECK_THROWS_AS(arrive(st, mixed, 15), StreamError);
}

TEST_CASE("tracker config validation") {
  TrackerConfig cfg;
  cfg.fp_iters = 0;
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
}
