// Command-line front end: synth, fit, track, score, export-factors, bench.
// Every flag is `--key value` with the same key usable in a `key = value`
// config file (--config); flags override the file.

#include "mvtc/config.hpp"
#include "mvtc/csv.hpp"
#include "mvtc/errors.hpp"
#include "mvtc/experiment.hpp"
#include "mvtc/metrics.hpp"
#include "mvtc/multiversion.hpp"
#include "mvtc/online.hpp"
#include "mvtc/solver.hpp"
#include "mvtc/synth.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using namespace mvtc;

namespace {

const std::vector<std::string> kSolverKeys = {
    "rank",        "alpha",      "rho_A",          "rho",        "max_outer_iters",
    "tol_rel_obj", "tol_station", "momentum",      "init_iters", "seed",
    "literal_update", "scale_data", "lipschitz_tol", "restart_tol"};
const std::vector<std::string> kTrackerKeys = {"fp_iters", "fp_tol", "literal_fp", "resync_every"};
const std::vector<std::string> kGeneratorKeys = {
    "I", "J", "K", "S", "F", "seed", "fractions", "concentration", "noise_scale",
    "factor_smoothness", "smoothing_window", "mismatch_scale", "communities",
    "community_spread", "constant_factors"};

// String-valued options for a set of keys plus --config.
class KeyedOptions {
 public:
  explicit KeyedOptions(CLI::App* app) : app_(app) {
    app_->add_option("--config", config_path_, "key = value config file");
  }

  void add(const std::vector<std::string>& keys) {
    for (const auto& key : keys) {
      if (values_.count(key)) continue;
      values_[key];
      app_->add_option("--" + key, values_[key]);
    }
  }

  KeyValues resolve() const {
    KeyValues kv;
    if (!config_path_.empty()) kv = load_key_values(config_path_);
    for (const auto& [key, value] : values_)
      if (app_->count("--" + key) > 0) kv[key] = value;
    return kv;
  }

 private:
  CLI::App* app_;
  std::string config_path_;
  std::map<std::string, std::string> values_;
};

std::optional<std::string> pop(KeyValues& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) return std::nullopt;
  std::string v = it->second;
  kv.erase(it);
  return v;
}

std::string require(KeyValues& kv, const std::string& key) {
  auto v = pop(kv, key);
  if (!v || v->empty()) throw ArgumentError("missing required option --" + key);
  return *v;
}

std::optional<std::int64_t> pop_int(KeyValues& kv, const std::string& key) {
  auto v = pop(kv, key);
  if (!v) return std::nullopt;
  try {
    return parse_int(*v, 0);
  } catch (const IngestError&) {
    throw ArgumentError("--" + key + ": expected an integer, got '" + *v + "'");
  }
}

std::optional<std::size_t> pop_count(KeyValues& kv, const std::string& key) {
  auto v = pop(kv, key);
  if (!v) return std::nullopt;
  try {
    return parse_index(*v, 0);
  } catch (const IngestError&) {
    throw ArgumentError("--" + key + ": expected a nonnegative integer, got '" + *v + "'");
  }
}

bool pop_bool(KeyValues& kv, const std::string& key) {
  auto v = pop(kv, key);
  if (!v) return false;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw ArgumentError("--" + key + ": expected true/false, got '" + *v + "'");
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw ArgumentError("cannot write " + path.string());
  return f;
}

std::string r2_text(const ScoreReport& r) { return r.r2 ? format_real(*r.r2) : "undefined"; }

// Dataset-level options shared by fit, track and export-factors.
struct DataOptions {
  std::vector<UpdateEvent> events;
  IngestOptions ingest;
  LocationGraph graph;
};

DataOptions load_data(KeyValues& kv, bool horizon_from_start) {
  DataOptions d;
  d.events = read_events(require(kv, "events"));
  std::size_t max_loc = 0, max_feat = 0;
  std::int64_t max_ld = 0;
  for (const auto& e : d.events) {
    max_loc = std::max(max_loc, e.location + 1);
    max_feat = std::max(max_feat, e.feature + 1);
    max_ld = std::max(max_ld, e.ld);
  }
  d.ingest.I = pop_count(kv, "I").value_or(max_loc);
  d.ingest.J = pop_count(kv, "J").value_or(max_feat);
  const auto K = pop_count(kv, "K");
  if (!K) throw ArgumentError("missing required option --K");
  d.ingest.K = *K;
  d.ingest.epoch = pop_int(kv, "epoch").value_or(0);
  if (horizon_from_start) {
    const auto start = pop_int(kv, "start");
    if (!start) throw ArgumentError("missing required option --start");
    d.ingest.horizon = *start;
  } else {
    d.ingest.horizon = pop_int(kv, "horizon").value_or(max_ld);
  }
  if (d.ingest.I == 0 || d.ingest.J == 0) throw ArgumentError("no events and no --I/--J given");
  d.graph = LocationGraph(d.ingest.I);
  if (auto g = pop(kv, "graph"); g && !g->empty()) d.graph = LocationGraph::load_csv(*g, d.ingest.I);
  return d;
}

std::vector<CellValue> scope_cells(const std::vector<CellValue>& truth, std::int64_t first_gd,
                                   std::int64_t last_gd, bool all_gds) {
  std::vector<CellValue> out;
  for (const auto& c : truth)
    if (c.gd <= last_gd && (all_gds || c.gd >= first_gd)) out.push_back(c);
  return out;
}

void write_config(const fs::path& path, const KeyValues& kv) {
  auto f = open_out(path);
  f << format_key_values(kv);
}

void write_diagnostics(const fs::path& path, const Diagnostics& diag) {
  auto f = open_out(path);
  f << "iter,objective,residual,seconds\n";
  for (std::size_t it = 0; it < diag.objective_trace.size(); ++it) {
    f << it << ',' << format_real(diag.objective_trace[it]) << ',';
    if (it > 0 && it - 1 < diag.residual_trace.size()) {
      f << format_real(diag.residual_trace[it - 1]) << ',' << format_real(diag.seconds_trace[it - 1]);
    } else {
      f << ",0";
    }
    f << '\n';
  }
}

// ---------------------------------------------------------------------------

int cmd_synth(KeyValues kv) {
  const fs::path out = require(kv, "out");
  GeneratorConfig cfg;
  const auto epoch = pop_int(kv, "epoch").value_or(0);
  auto horizon_opt = pop_int(kv, "horizon");
  apply_generator_keys(cfg, kv);
  reject_unknown_keys(kv);
  const std::int64_t horizon = horizon_opt.value_or(epoch + static_cast<std::int64_t>(cfg.S) - 1);

  const GroundTruth gt = gen_ground_truth(cfg);
  const Tensor4 updates = split_updates(gt.totals, cfg);
  const EmittedData emitted = emit_events(updates, horizon, cfg.K, epoch);
  fs::create_directories(out);
  write_events((out / "events.csv").string(), emitted.events);
  write_truth((out / "truth.csv").string(), emitted.withheld);
  write_truth((out / "truth_all.csv").string(), truth_cells(updates, epoch));
  SolverConfig meta;
  meta.rank = cfg.F;
  meta.seed = cfg.seed;
  {
    auto f = open_out(out / "factors_true.json");
    f << export_factors_json(planted_update_factors(gt, cfg), meta) << '\n';
  }
  if (cfg.communities > 0) {
    auto f = open_out(out / "graph.csv");
    f << "u,v,weight\n";
    const Matrix& W = gt.graph.adjacency();
    for (Eigen::Index u = 0; u < W.rows(); ++u)
      for (Eigen::Index v = u + 1; v < W.cols(); ++v)
        if (W(u, v) != 0.0) f << u << ',' << v << ',' << format_real(W(u, v)) << '\n';
  }
  KeyValues resolved = generator_keys(cfg);
  resolved["epoch"] = std::to_string(epoch);
  resolved["horizon"] = std::to_string(horizon);
  write_config(out / "config.txt", resolved);
  std::cout << "wrote " << emitted.events.size() << " events and " << emitted.withheld.size()
            << " withheld truth cells to " << out.string() << '\n';
  return 0;
}

int cmd_fit(KeyValues kv) {
  const fs::path out = require(kv, "out");
  const auto truth_path = pop(kv, "truth");
  const bool all_gds = pop_bool(kv, "all_gds");
  DataOptions data = load_data(kv, false);
  SolverConfig cfg;
  apply_solver_keys(cfg, kv);
  reject_unknown_keys(kv);

  const MultiVersionDataset ds = ingest(data.events, data.ingest);
  fs::create_directories(out);
  FitResult result;
  if (truth_path) {
    const std::int64_t first = ds.horizon() - static_cast<std::int64_t>(ds.K()) + 2;
    const auto truth = scope_cells(read_truth(*truth_path), first, ds.horizon(), all_gds);
    StaticReport report = run_static(ds, data.graph, truth, cfg, true);
    auto f = open_out(out / "report.csv");
    f << "method,scope,rmse,mae,r2,relative_rmse,n\n";
    auto g = open_out(out / "report_per_gd.csv");
    g << "method,gd,rmse,mae,r2,relative_rmse,n\n";
    const std::string scope = all_gds ? "all_gds" : "last_k_minus_1";
    for (const auto& m : report.methods) {
      const auto& r = m.overall;
      f << m.method << ',' << scope << ',' << format_real(r.rmse) << ',' << format_real(r.mae)
        << ',' << r2_text(r) << ',' << format_real(r.relative_rmse) << ',' << r.n << '\n';
      for (const auto& [gd, s] : m.per_gd) {
        g << m.method << ',' << gd << ',' << format_real(s.rmse) << ',' << format_real(s.mae)
          << ',' << r2_text(s) << ',' << format_real(s.relative_rmse) << ',' << s.n << '\n';
      }
      std::cout << m.method << ": rmse=" << format_real(r.rmse) << " mae=" << format_real(r.mae)
                << " r2=" << r2_text(r) << " n=" << r.n << '\n';
    }
    result = std::move(report.mtc);
  } else {
    result = fit(ds, data.graph, cfg);
  }
  write_estimates((out / "estimates.csv").string(), tensor_cells(result.estimate, ds.epoch(), 0, ds.S()));
  write_estimates((out / "hybrid.csv").string(), tensor_cells(result.hybrid, ds.epoch(), 0, ds.S()));
  write_estimates((out / "naive.csv").string(), tensor_cells(naive_estimate(ds), ds.epoch(), 0, ds.S()));
  write_diagnostics(out / "diagnostics.csv", result.diagnostics);
  {
    auto f = open_out(out / "factors.json");
    f << export_factors_json(result.theta, cfg, result.diagnostics.objective_trace) << '\n';
  }
  KeyValues resolved = solver_keys(cfg);
  resolved["I"] = std::to_string(ds.I());
  resolved["J"] = std::to_string(ds.J());
  resolved["K"] = std::to_string(ds.K());
  resolved["epoch"] = std::to_string(ds.epoch());
  resolved["horizon"] = std::to_string(ds.horizon());
  write_config(out / "config.txt", resolved);
  for (const auto& w : result.diagnostics.warnings) std::cerr << "mvtc: warning: " << w << '\n';
  std::cout << "fit: " << result.diagnostics.iterations << " iterations, stop "
            << result.diagnostics.stop_reason << ", objective "
            << format_real(result.diagnostics.objective_trace.back()) << '\n';
  return 0;
}

int cmd_track(KeyValues kv) {
  const fs::path out = require(kv, "out");
  const auto truth_path = pop(kv, "truth");
  const bool batch_restart = pop_bool(kv, "batch_restart");
  const bool first_only = pop_bool(kv, "first_appearance");
  const auto final_opt = pop_int(kv, "final");
  DataOptions data = load_data(kv, true);
  TrackerConfig cfg;
  apply_tracker_keys(cfg, kv);
  reject_unknown_keys(kv);
  std::int64_t max_ld = data.ingest.horizon;
  for (const auto& e : data.events) max_ld = std::max(max_ld, e.ld);
  const std::int64_t final_horizon = final_opt.value_or(max_ld);

  fs::create_directories(out / "estimates");
  auto diag = open_out(out / "diagnostics.csv");
  diag << "arrival,seconds,fp_iters_used,residual\n";
  auto write_arrival = [&](std::int64_t ld, const std::vector<CellValue>& cells, double seconds,
                           std::size_t fp_iters, double residual) {
    write_estimates((out / "estimates" / ("ld_" + std::to_string(ld) + ".csv")).string(), cells);
    diag << ld << ',' << format_real(seconds) << ',' << fp_iters << ',' << format_real(residual) << '\n';
  };

  if (truth_path) {
    DynamicOptions opt;
    opt.tracker = cfg;
    opt.batch_restart = batch_restart;
    opt.first_appearance_only = first_only;
    const DynamicReport report = run_dynamic(data.events, data.ingest, final_horizon,
                                             read_truth(*truth_path), data.graph, opt);
    auto per = open_out(out / "per_arrival.csv");
    per << "arrival,gd,arm,rmse,mae,r2,relative_rmse,n\n";
    auto timing = open_out(out / "timing.csv");
    timing << "arrival,online_seconds,batch_seconds\n";
    for (const auto& a : report.arrivals) {
      write_arrival(a.ld, a.online_estimates, a.online_seconds, a.fp_iters, a.residual);
      auto rows = [&](const char* arm, const auto& scores) {
        for (const auto& [gd, r] : scores) {
          per << a.ld << ',' << gd << ',' << arm << ',' << format_real(r.rmse) << ','
              << format_real(r.mae) << ',' << r2_text(r) << ',' << format_real(r.relative_rmse)
              << ',' << r.n << '\n';
        }
      };
      rows("online", a.online);
      rows("batch", a.batch);
      timing << a.ld << ',' << format_real(a.online_seconds) << ','
             << (batch_restart ? format_real(a.batch_seconds) : std::string()) << '\n';
    }
    auto rep = open_out(out / "dynamic_report.csv");
    rep << "arm,metric,mean,std,n\n";
    auto summary = [&](const char* arm, const DynamicSummary& s) {
      auto line = [&](const char* metric, const MeanStd& m) {
        rep << arm << ',' << metric << ',' << format_real(m.mean) << ',' << format_real(m.std)
            << ',' << m.n << '\n';
      };
      line("rmse", s.rmse);
      line("mae", s.mae);
      line("relative_rmse", s.relative_rmse);
    };
    summary("online", report.online);
    if (batch_restart) summary("batch", report.batch);
    std::cout << "online rmse " << format_real(report.online.rmse.mean) << " +- "
              << format_real(report.online.rmse.std) << ", " << format_real(report.online.seconds.mean)
              << " s/arrival\n";
    if (batch_restart) {
      std::cout << "batch  rmse " << format_real(report.batch.rmse.mean) << " +- "
                << format_real(report.batch.rmse.std) << ", "
                << format_real(report.batch.seconds.mean) << " s/arrival\n";
    }
  } else {
    if (batch_restart) throw ArgumentError("--batch_restart needs --truth");
    std::vector<UpdateEvent> initial, stream;
    for (const auto& e : data.events) {
      if (e.ld <= data.ingest.horizon) {
        initial.push_back(e);
      } else if (e.ld <= final_horizon) {
        stream.push_back(e);
      }
    }
    std::stable_sort(stream.begin(), stream.end(),
                     [](const UpdateEvent& a, const UpdateEvent& b) { return a.ld < b.ld; });
    TrackerState state = start_tracker(ingest(initial, data.ingest), data.graph, cfg);
    for (const auto& r : track(state, stream)) {
      write_arrival(r.ld, tensor_cells(r.window, r.first_window_gd, 0, r.window.S()), r.seconds,
                    r.fp_iters, r.residual);
    }
    std::cout << "tracked " << state.arrivals << " arrivals\n";
  }
  KeyValues resolved = tracker_keys(cfg);
  resolved["I"] = std::to_string(data.ingest.I);
  resolved["J"] = std::to_string(data.ingest.J);
  resolved["K"] = std::to_string(data.ingest.K);
  resolved["epoch"] = std::to_string(data.ingest.epoch);
  resolved["start"] = std::to_string(data.ingest.horizon);
  resolved["final"] = std::to_string(final_horizon);
  resolved["batch_restart"] = batch_restart ? "true" : "false";
  resolved["first_appearance"] = first_only ? "true" : "false";
  write_config(out / "config.txt", resolved);
  return 0;
}

int cmd_score(KeyValues kv) {
  const auto estimates = read_estimates(require(kv, "estimates"));
  const auto truth_path = require(kv, "truth");
  pop(kv, "seed");
  reject_unknown_keys(kv);
  // Either file may be a truth or estimate CSV.
  std::vector<CellValue> truth;
  try {
    truth = read_truth(truth_path);
  } catch (const IngestError&) {
    truth = read_estimates(truth_path);
  }
  // Truth may span more GDs than the estimate; score the GDs estimated.
  std::set<std::int64_t> gds;
  for (const auto& c : estimates) gds.insert(c.gd);
  std::erase_if(truth, [&](const CellValue& c) { return !gds.count(c.gd); });
  const ScoreReport r = score_cells(estimates, truth);
  std::cout << "rmse=" << format_real(r.rmse) << " mae=" << format_real(r.mae) << " r2=" << r2_text(r)
            << " relative_rmse=" << format_real(r.relative_rmse) << " n=" << r.n << '\n';
  return 0;
}

int cmd_export(KeyValues kv) {
  const auto factors_path = pop(kv, "factors");
  const auto reference_path = pop(kv, "reference");
  const auto out = pop(kv, "out");
  nlohmann::json doc;
  if (factors_path) {
    std::ifstream f(*factors_path);
    if (!f) throw ArgumentError("cannot open " + *factors_path);
    pop(kv, "seed");
    reject_unknown_keys(kv);
    doc = nlohmann::json::parse(f);
  } else {
    DataOptions data = load_data(kv, false);
    SolverConfig cfg;
    apply_solver_keys(cfg, kv);
    reject_unknown_keys(kv);
    const FitResult result = fit(ingest(data.events, data.ingest), data.graph, cfg);
    doc = nlohmann::json::parse(
        export_factors_json(result.theta, cfg, result.diagnostics.objective_trace));
  }
  const FactorSet theta = import_factors_json(doc.dump());
  const auto norms = column_norms(theta);
  doc["column_norms"] = {{"A", norms[0]}, {"B", norms[1]}, {"C", norms[2]}, {"D", norms[3]}};
  if (reference_path) {
    std::ifstream f(*reference_path);
    if (!f) throw ArgumentError("cannot open " + *reference_path);
    const std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    const ColumnMatch m = match_columns(theta, import_factors_json(text));
    nlohmann::json perm = nlohmann::json::array();
    for (std::size_t p : m.perm) perm.push_back(p == SIZE_MAX ? nlohmann::json(nullptr) : nlohmann::json(p));
    doc["matching"] = {{"perm", perm}, {"congruence", m.congruence}, {"mean_congruence", m.mean_congruence}};
  }
  if (out) {
    auto f = open_out(*out);
    f << doc.dump(2) << '\n';
  } else {
    std::cout << doc.dump(2) << '\n';
  }
  return 0;
}

int cmd_bench(KeyValues kv) {
  Dims4 base{64, 16, 4, 64};
  base.I = pop_count(kv, "I").value_or(base.I);
  base.J = pop_count(kv, "J").value_or(base.J);
  base.K = pop_count(kv, "K").value_or(base.K);
  base.S = pop_count(kv, "S").value_or(base.S);
  const std::size_t F = pop_count(kv, "F").value_or(8);
  const std::size_t iters = pop_count(kv, "iters").value_or(10);
  const std::uint64_t seed = pop_count(kv, "seed").value_or(0);
  const auto out = pop(kv, "out");
  reject_unknown_keys(kv);
  std::ostringstream csv;
  csv << "dim,value,seconds_per_iter\n";
  for (const auto& p : bench_scaling(base, F, iters, seed)) {
    const std::size_t value = p.dim == "base" ? base.I : p.value;
    csv << p.dim << ',' << value << ',' << format_real(p.seconds_per_iter) << '\n';
  }
  if (out) {
    auto f = open_out(*out);
    f << csv.str();
  } else {
    std::cout << csv.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-version tensor completion for under-reported counts"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "generate a synthetic multi-version dataset");
  KeyedOptions synth_opts(synth);
  synth_opts.add(kGeneratorKeys);
  synth_opts.add({"epoch", "horizon", "out"});

  const std::vector<std::string> data_keys = {"events", "graph", "I", "J", "K", "epoch", "out"};

  auto* fitc = app.add_subcommand("fit", "static completion of the latest snapshot");
  KeyedOptions fit_opts(fitc);
  fit_opts.add(data_keys);
  fit_opts.add({"horizon", "truth", "all_gds"});
  fit_opts.add(kSolverKeys);

  auto* trackc = app.add_subcommand("track", "online replay of a stream after an initial fit");
  KeyedOptions track_opts(trackc);
  track_opts.add(data_keys);
  track_opts.add({"start", "final", "truth", "batch_restart", "first_appearance"});
  track_opts.add(kSolverKeys);
  track_opts.add(kTrackerKeys);

  auto* scorec = app.add_subcommand("score", "score an estimate CSV against a truth CSV");
  KeyedOptions score_opts(scorec);
  score_opts.add({"estimates", "truth", "seed"});

  auto* exportc = app.add_subcommand("export-factors", "factor JSON with column norms and matching");
  KeyedOptions export_opts(exportc);
  export_opts.add({"factors", "reference", "out", "horizon"});
  export_opts.add(data_keys);
  export_opts.add(kSolverKeys);

  auto* benchc = app.add_subcommand("bench", "per-iteration timing under dimension doubling");
  KeyedOptions bench_opts(benchc);
  bench_opts.add({"I", "J", "K", "S", "F", "iters", "seed", "out"});

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*synth) return cmd_synth(synth_opts.resolve());
    if (*fitc) return cmd_fit(fit_opts.resolve());
    if (*trackc) return cmd_track(track_opts.resolve());
    if (*scorec) return cmd_score(score_opts.resolve());
    if (*exportc) return cmd_export(export_opts.resolve());
    if (*benchc) return cmd_bench(bench_opts.resolve());
  } catch (const std::exception& e) {
    std::cerr << "mvtc: error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
