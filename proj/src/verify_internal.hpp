// Helpers shared between the self-check suites. Internal to the library.
#pragma once

#include <functional>
#include <stdexcept>
#include <string>

#include "discore/state_space.hpp"
#include "discore/verify.hpp"

namespace discore {
class Rng;
}

namespace discore::verify_internal {

// Thrown inside a check body to mark the check failed with a reason.
struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

[[noreturn]] inline void fail_check(const std::string& msg) { throw CheckFailure(msg); }

// printf-style formatting into a std::string (truncates past 511 chars).
std::string strf(const char* format, ...) __attribute__((format(printf, 1, 2)));

// Runs one named check, converting CheckFailure (and any other exception)
// into a failed CheckResult on the suite.
void run_check(SuiteResult& suite, const std::string& name,
               const std::function<std::string()>& body);

// Full-support product-free law with entries drawn uniformly from [lo, hi],
// then normalized.
DistTable random_dist(StateSpace sp, Rng& rng, double lo, double hi);

// Runs `command` through the shell with stderr folded into stdout; returns
// the process exit code (or -1 if it did not exit normally) and captures
// the combined output.
int run_command(const std::string& command, std::string* output);

// Shell-quotes a single argument with single quotes.
std::string shell_quote(const std::string& arg);

// True when both files exist and have identical bytes.
bool files_identical(const std::string& a, const std::string& b);

}  // namespace discore::verify_internal
