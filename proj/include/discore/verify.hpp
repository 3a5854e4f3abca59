// Runtime property-suite harness behind the `verify` subcommand.
//
// One suite per library module, each bundling that module's documented
// invariants as named checks: a check either passes with a short numeric
// detail line or fails with the measured violation (exceptions are caught
// and reported as failures, never propagated).  The acceptance tests reuse
// individual suites; the CLI runs all eight and exits nonzero if anything
// failed.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "discore/trainer.hpp"

namespace discore {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct SuiteResult {
  std::string name;
  std::vector<CheckResult> checks;

  bool pass() const {
    for (const CheckResult& c : checks) {
      if (!c.pass) return false;
    }
    return true;
  }
};

// Suite names in report order; they mirror the library modules 1:1.
const std::vector<std::string>& suite_names();

SuiteResult verify_state_process(const RunConfig& cfg);
SuiteResult verify_score_oracle(const RunConfig& cfg);
SuiteResult verify_bregman_loss(const RunConfig& cfg);
SuiteResult verify_score_net(const RunConfig& cfg);
SuiteResult verify_trainer(const RunConfig& cfg);
SuiteResult verify_reverse_sampler(const RunConfig& cfg);
SuiteResult verify_diagnostics(const RunConfig& cfg);
// The cli suite drives the binary itself through subprocesses; self_path
// must point at the executable (the CLI resolves /proc/self/exe).
SuiteResult verify_cli(const RunConfig& cfg, const std::string& self_path);

// which: suite names to run (empty = all, order fixed); unknown names are a
// ConfigError naming the valid suites.
std::vector<SuiteResult> run_verify(const RunConfig& cfg,
                                    const std::vector<std::string>& which,
                                    const std::string& self_path);

void print_verify_report(const std::vector<SuiteResult>& results, std::ostream& out);
bool verify_all_pass(const std::vector<SuiteResult>& results);

// Dense matrix exponential by scaling-and-squaring with a Taylor kernel,
// accurate to ~1e-13 for the small generator matrices used here. Row-major
// n x n. Shared as the independent oracle that the uniformization series is
// audited against.
std::vector<double> dense_expm(const std::vector<double>& a, int n);

}  // namespace discore
