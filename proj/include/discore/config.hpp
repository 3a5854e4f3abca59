// Flat key=value run configuration.
//
// A config file is plain text: one `key = value` per line, '#' starts a
// comment, blank lines are ignored.  The keys are exactly the RunConfig
// fields (list in config_keys(), documented in docs/file-formats.md), and
// unknown keys are rejected with the full valid-key list so typos surface
// immediately.  CLI --set overrides reuse the same assignment syntax.
#pragma once

#include <string>
#include <vector>

#include "discore/state_space.hpp"
#include "discore/trainer.hpp"

namespace discore {

// All accepted config keys, in documentation order.
const std::vector<std::string>& config_keys();

// Applies one "key=value" assignment; throws ConfigError for unknown keys or
// malformed values.
void apply_assignment(const std::string& assignment, RunConfig& cfg);

// Reads a whole config file into cfg (fields not mentioned keep their
// current values).
void load_config_file(const std::string& path, RunConfig& cfg);

// Data-law specification:
//   uniform                     the flat law
//   delta:<d symbols>           point mass, e.g. delta:0,2,1
//   product:<groups>            independent coordinates; each group is S
//                               comma-separated weights, groups separated by
//                               ';'. One group is broadcast to every
//                               coordinate. e.g. product:0.5,0.3,0.2
//   table:<path>                S^d whitespace-separated weights, row order
//                               = state index order
// Weights are normalized; they must be nonnegative with positive total.
DistTable parse_p0(const std::string& spec, StateSpace sp);

}  // namespace discore
