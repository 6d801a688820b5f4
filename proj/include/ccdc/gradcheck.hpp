#pragma once

#include <string>
#include <vector>

namespace ccdc {

struct GradCheckLine {
  std::string name;
  double max_rel = 0;
  double tol = 0;
  bool pass = false;
};

struct GradCheckReport {
  std::vector<GradCheckLine> lines;
  bool all_pass = true;
};

// 64-bit central finite-difference suite: every sampling pattern's conv in
// isolation (weights and input), batch norm, CFIM, max pool, the MSE+CDL
// loss, and two end-to-end networks (single stream at 64x64, dual stream
// with CFIMs at 32x32) covering every parameter tensor. inject_fault flips
// the sign of one analytic conv gradient entry to prove the harness can
// fail.
GradCheckReport run_gradient_checks(bool inject_fault);

std::string format_gradcheck(const GradCheckReport& report);

}  // namespace ccdc
