// diff/gradcheck.hpp
//
// Central finite-difference verification of analytic gradients.  The loss
// function is handed a flag: with_grad=true must run backward and leave
// gradients in the parameter set, with_grad=false must only evaluate.
// Both calls must produce bitwise-identical losses or the model under
// test is nondeterministic and the check aborts.

#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "diff/tensor.hpp"

namespace sea {

struct GradCheckOptions {
  double eps = 1e-4;  // accepted range [1e-6, 1e-3]
  int probes = 20;    // coordinates sampled per call
  uint64_t seed = 1;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  double loss = 0.0;
  int probes = 0;
  std::string worst_param;
  int64_t worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

using LossFn = std::function<double(bool with_grad)>;

// Relative error |a - n| / max(|a|, |n|, 1e-8), maximized over sampled
// coordinates of the trainable parameters.
GradCheckReport grad_check(ParamSet& params, const LossFn& fn,
                           const GradCheckOptions& opt = {});

}  // namespace sea
