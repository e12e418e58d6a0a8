#pragma once

// Built-in invariant suites: dense-matrix oracles for the projectors and the
// first-order identities, and finite-difference checks of analytic gradients.

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace gu {

struct SelftestResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<SelftestResult> run_selftest(std::uint64_t seed = 7);

// Prints one "PASS name: detail" / "FAIL name: detail" line per check and
// returns true when all passed.
bool report_selftest(const std::vector<SelftestResult>& results, std::ostream& out);

}  // namespace gu
