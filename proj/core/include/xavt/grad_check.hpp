#pragma once

#include <functional>
#include <string>
#include <vector>

#include "xavt/param.hpp"

namespace xavt {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  int64_t worst_index = -1;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
  std::string worst_param;
};

// Compares reverse-mode gradients of the scalar-valued graph builder `f`
// against central finite differences (f(p+h)-f(p-h))/2h, elementwise, with
// relative error |a-b| / max(|a|,|b|,1e-8). Frozen parameters are excluded
// from the report. `f` must be deterministic; this is verified by two
// baseline evaluations, and a mismatch raises ContractError.
//
// When `fd_eval`/`fd_params` are supplied (a mirror of the same function
// whose i-th parameter shares values with params[i], typically an f64 twin),
// the finite differences are taken through the mirror so the reference stays
// truncation-dominated while the gradients under test come from `f` itself.
GradCheckReport grad_check(const std::function<Tensor()>& f,
                           const std::vector<Parameter*>& params, double h,
                           const std::function<double()>& fd_eval = {},
                           const std::vector<Parameter*>& fd_params = {});

std::string format_report(const GradCheckReport& report);

}  // namespace xavt
