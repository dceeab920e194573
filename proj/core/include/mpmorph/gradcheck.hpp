#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mpmorph/loss.hpp"

namespace mpmorph {

/// One scene of the finite-difference matrix.
struct GradcheckCase {
  int dim = 3;
  int particles = 16;
  int horizon = 3;
  LossKind loss = LossKind::kLogMass;

  /// e.g. "3d-p16-h3-logmass"
  std::string name() const;
};

struct GradcheckOptions {
  std::vector<int> dims{2, 3};
  std::vector<int> particles{1, 16, 64};
  std::vector<int> horizons{1, 3, 5};
  std::vector<LossKind> losses{LossKind::kPosition, LossKind::kMass, LossKind::kLogMass};
  /// Substring filter on GradcheckCase::name(); empty runs everything.
  std::string filter;
  double h = 1e-5;
  double rel_tol = 1e-4;
  /// Entries with |FD| at or below this are compared in absolute terms.
  double fd_floor = 1e-8;
  double abs_tol = 1e-9;
  std::uint64_t seed = 12345;
};

struct GradcheckResult {
  GradcheckCase scene;
  double max_rel_error = 0.0;        // over entries with |FD| > fd_floor
  double max_abs_error_small = 0.0;  // over the remaining entries
  int checked = 0;                   // entries with |FD| > fd_floor
  int entries = 0;
  double seconds = 0.0;
  bool passed = false;
};

std::vector<GradcheckCase> gradcheck_cases(const GradcheckOptions& options);

/// Random interior cluster on a 16^Dim grid with perturbed F, v, C and a
/// non-zero control at step 1; the target sits near the simulated end state.
GradcheckResult run_gradcheck_case(const GradcheckCase& scene, const GradcheckOptions& options);

std::vector<GradcheckResult> run_gradcheck(const GradcheckOptions& options,
                                           const std::function<void(const GradcheckResult&)>& on_result = {});

}  // namespace mpmorph
