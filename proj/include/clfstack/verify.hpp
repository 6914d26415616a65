#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace clfstack {

/// One property check. Passing means `value <= limit` unless the check says
/// otherwise in `detail`.
struct CheckResult {
  std::string suite;
  std::string name;
  bool passed = false;
  double value = 0.0;
  double limit = 0.0;
  std::string detail;
};

struct SuiteReport {
  std::string suite;
  std::uint64_t seed = 0;
  std::vector<CheckResult> checks;
  bool passed() const;
};

struct VerifyOptions {
  std::uint64_t seed = 1;
  /// Scenario files for the config round-trip checks; empty skips them.
  std::string scenario_dir;
};

/// dynamics, valuefn, clf, qp, stack, sim, config, all
const std::vector<std::string>& available_suites();

/// Throws ValidationError for an unknown suite, listing the available ones.
SuiteReport run_suite(const std::string& name, const VerifyOptions& options = {});

void write_report_json(std::ostream& os, const SuiteReport& report);

}  // namespace clfstack
