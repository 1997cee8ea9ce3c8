#pragma once

#include "mvtc/online.hpp"
#include "mvtc/solver.hpp"
#include "mvtc/synth.hpp"

#include <iosfwd>
#include <map>
#include <string>

namespace mvtc {

/// Flat `key = value` configuration. '#' starts a comment; blank lines are
/// skipped; a repeated key keeps the last value.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::istream& in);
KeyValues load_key_values(const std::string& path);

// Each apply_* consumes the keys it knows and removes them from `kv`; the
// caller decides whether leftovers are an error.
void apply_solver_keys(SolverConfig& cfg, KeyValues& kv);
void apply_tracker_keys(TrackerConfig& cfg, KeyValues& kv);
void apply_generator_keys(GeneratorConfig& cfg, KeyValues& kv);

/// Throws ArgumentError naming the first unknown key.
void reject_unknown_keys(const KeyValues& kv);

KeyValues solver_keys(const SolverConfig& cfg);
KeyValues tracker_keys(const TrackerConfig& cfg);
KeyValues generator_keys(const GeneratorConfig& cfg);

std::string format_key_values(const KeyValues& kv);

}  // namespace mvtc
