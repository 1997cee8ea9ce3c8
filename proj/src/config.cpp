#include "mvtc/config.hpp"

#include "mvtc/csv.hpp"
#include "mvtc/errors.hpp"

#include <fstream>
#include <sstream>

namespace mvtc {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Pops `key` from kv when present.
bool take(KeyValues& kv, const std::string& key, std::string& out) {
  const auto it = kv.find(key);
  if (it == kv.end()) return false;
  out = it->second;
  kv.erase(it);
  return true;
}

double as_real(const std::string& key, const std::string& v) {
  try {
    return parse_real(v, 0);
  } catch (const IngestError&) {
    throw ArgumentError("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

std::size_t as_count(const std::string& key, const std::string& v) {
  try {
    return parse_index(v, 0);
  } catch (const IngestError&) {
    throw ArgumentError("config key '" + key + "': expected a nonnegative integer, got '" + v + "'");
  }
}

bool as_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ArgumentError("config key '" + key + "': expected true/false, got '" + v + "'");
}

std::vector<double> as_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(as_real(key, item));
  }
  return out;
}

std::string list_text(const std::vector<double>& v) {
  std::string out;
  for (double x : v) out += (out.empty() ? "" : ",") + format_real(x);
  return out;
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

#define MVTC_REAL(name) \
  if (take(kv, #name, v)) cfg.name = as_real(#name, v)
#define MVTC_COUNT(name) \
  if (take(kv, #name, v)) cfg.name = as_count(#name, v)
#define MVTC_BOOL(name) \
  if (take(kv, #name, v)) cfg.name = as_bool(#name, v)

}  // namespace

KeyValues parse_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ArgumentError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ArgumentError("config line " + std::to_string(lineno) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues load_key_values(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ArgumentError("cannot open config " + path);
  return parse_key_values(f);
}

void apply_solver_keys(SolverConfig& out, KeyValues& kv) {
  // Work on a copy so a rejected value leaves `out` untouched.
  SolverConfig cfg = out;
  std::string v;
  if (take(kv, "rank", v)) cfg.rank = as_count("rank", v);
  MVTC_REAL(alpha);
  MVTC_REAL(rho_A);
  MVTC_REAL(rho);
  MVTC_COUNT(max_outer_iters);
  MVTC_REAL(tol_rel_obj);
  MVTC_REAL(tol_station);
  if (take(kv, "momentum", v)) {
    if (v == "fista") {
      cfg.momentum = Momentum::kFista;
    } else if (v == "none") {
      cfg.momentum = Momentum::kNone;
    } else {
      throw ArgumentError("config key 'momentum': expected fista or none, got '" + v + "'");
    }
  }
  MVTC_COUNT(init_iters);
  if (take(kv, "seed", v)) cfg.seed = as_count("seed", v);
  MVTC_BOOL(literal_update);
  MVTC_BOOL(scale_data);
  MVTC_REAL(lipschitz_tol);
  MVTC_REAL(restart_tol);
  cfg.validate();
  out = cfg;
}

void apply_tracker_keys(TrackerConfig& out, KeyValues& kv) {
  TrackerConfig cfg = out;
  apply_solver_keys(cfg.solver, kv);
  std::string v;
  MVTC_COUNT(fp_iters);
  MVTC_REAL(fp_tol);
  MVTC_BOOL(literal_fp);
  MVTC_COUNT(resync_every);
  cfg.validate();
  out = cfg;
}

void apply_generator_keys(GeneratorConfig& out, KeyValues& kv) {
  GeneratorConfig cfg = out;
  std::string v;
  MVTC_COUNT(I);
  MVTC_COUNT(J);
  MVTC_COUNT(K);
  MVTC_COUNT(S);
  MVTC_COUNT(F);
  if (take(kv, "seed", v)) cfg.seed = as_count("seed", v);
  if (take(kv, "fractions", v)) cfg.fractions = as_list("fractions", v);
  if (take(kv, "concentration", v)) cfg.concentration = as_list("concentration", v);
  MVTC_REAL(noise_scale);
  MVTC_BOOL(factor_smoothness);
  MVTC_COUNT(smoothing_window);
  MVTC_REAL(mismatch_scale);
  MVTC_COUNT(communities);
  MVTC_REAL(community_spread);
  MVTC_BOOL(constant_factors);
  cfg.validate();
  out = cfg;
}

#undef MVTC_REAL
#undef MVTC_COUNT
#undef MVTC_BOOL

void reject_unknown_keys(const KeyValues& kv) {
  if (!kv.empty()) throw ArgumentError("unknown config key '" + kv.begin()->first + "'");
}

KeyValues solver_keys(const SolverConfig& c) {
  return {
      {"rank", std::to_string(c.rank)},
      {"alpha", format_real(c.alpha)},
      {"rho_A", format_real(c.rho_A)},
      {"rho", format_real(c.rho)},
      {"max_outer_iters", std::to_string(c.max_outer_iters)},
      {"tol_rel_obj", format_real(c.tol_rel_obj)},
      {"tol_station", format_real(c.tol_station)},
      {"momentum", c.momentum == Momentum::kFista ? "fista" : "none"},
      {"init_iters", std::to_string(c.init_iters)},
      {"seed", std::to_string(c.seed)},
      {"literal_update", bool_text(c.literal_update)},
      {"scale_data", bool_text(c.scale_data)},
      {"lipschitz_tol", format_real(c.lipschitz_tol)},
      {"restart_tol", format_real(c.restart_tol)},
  };
}

KeyValues tracker_keys(const TrackerConfig& c) {
  KeyValues kv = solver_keys(c.solver);
  kv["fp_iters"] = std::to_string(c.fp_iters);
  kv["fp_tol"] = format_real(c.fp_tol);
  kv["literal_fp"] = bool_text(c.literal_fp);
  kv["resync_every"] = std::to_string(c.resync_every);
  return kv;
}

KeyValues generator_keys(const GeneratorConfig& c) {
  KeyValues kv{
      {"I", std::to_string(c.I)},
      {"J", std::to_string(c.J)},
      {"K", std::to_string(c.K)},
      {"S", std::to_string(c.S)},
      {"F", std::to_string(c.F)},
      {"seed", std::to_string(c.seed)},
      {"fractions", list_text(c.profile())},
      {"noise_scale", format_real(c.noise_scale)},
      {"factor_smoothness", bool_text(c.factor_smoothness)},
      {"smoothing_window", std::to_string(c.smoothing_window)},
      {"mismatch_scale", format_real(c.mismatch_scale)},
      {"communities", std::to_string(c.communities)},
      {"community_spread", format_real(c.community_spread)},
      {"constant_factors", bool_text(c.constant_factors)},
  };
  if (!c.concentration.empty()) kv["concentration"] = list_text(c.concentration);
  return kv;
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

}  // namespace mvtc
