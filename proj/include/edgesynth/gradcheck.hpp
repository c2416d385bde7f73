#pragma once

#include <functional>
#include <string>
#include <vector>

#include "edgesynth/config.hpp"
#include "edgesynth/params.hpp"

namespace edgesynth {

// Per-tensor relative error ||analytic - fd||_2 / (||analytic||_2 +
// ||fd||_2) over elementwise central differences.
struct GradCheckRow {
  std::string name;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::string label;
  std::vector<GradCheckRow> rows;
  double worst = 0.0;
  bool pass(double tol = 1e-4) const { return worst <= tol; }
  std::vector<std::string> offenders(double tol = 1e-4) const;
};

// Element-wise central differences (f64, default step 1e-3) against the
// analytic gradients of `build`, for every trainable tensor the loss touches.
GradCheckReport check_gradients(
    ParamStore& store, const std::function<ag::VPtr(GraphParams&)>& build,
    double step = 1e-3);

// Micro-model cases. Test data is re-seeded until every L1 residual keeps a
// safe distance from zero, so the central differences never straddle a kink.
GradCheckReport grad_check_pretrain(int stage, uint64_t seed = 7);
GradCheckReport grad_check_finetune(uint64_t seed = 7);

}  // namespace edgesynth
