// diff/gradcheck.cpp

#include "diff/gradcheck.hpp"

#include <cmath>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace sea {

GradCheckReport grad_check(ParamSet& params, const LossFn& fn,
                           const GradCheckOptions& opt) {
  check_arg(opt.eps >= 1e-6 && opt.eps <= 1e-3,
            "grad_check: eps outside [1e-6, 1e-3]");
  check_arg(opt.probes > 0, "grad_check: probes must be positive");

  params.zero_grads();
  double loss_a = fn(true);
  double loss_b = fn(false);
  check_numeric(loss_a == loss_b,
                "grad_check: loss is not deterministic across evaluations");
  check_numeric(std::isfinite(loss_a), "grad_check: loss is not finite");

  // Enumerate trainable coordinates once.
  struct Coord {
    size_t param;
    int64_t index;
  };
  std::vector<size_t> trainables;
  int64_t total = 0;
  for (size_t i = 0; i < params.size(); ++i) {
    if (!params.at(i).trainable) continue;
    trainables.push_back(i);
    total += params.at(i).t.numel();
  }
  check_arg(total > 0, "grad_check: no trainable coordinates");

  Rng rng(opt.seed);
  GradCheckReport rep;
  rep.loss = loss_a;
  rep.probes = opt.probes;
  for (int probe = 0; probe < opt.probes; ++probe) {
    int64_t flat = rng.uniform_int(total);
    size_t pi = 0;
    for (size_t k = 0; k < trainables.size(); ++k) {
      int64_t n = params.at(trainables[k]).t.numel();
      if (flat < n) {
        pi = trainables[k];
        break;
      }
      flat -= n;
    }
    Parameter& p = params.at(pi);
    double saved = p.t.v[flat];
    p.t.v[flat] = saved + opt.eps;
    double fp = fn(false);
    p.t.v[flat] = saved - opt.eps;
    double fm = fn(false);
    p.t.v[flat] = saved;
    check_numeric(std::isfinite(fp) && std::isfinite(fm),
                  "grad_check: perturbed loss is not finite");
    double numeric = (fp - fm) / (2.0 * opt.eps);
    double analytic = p.t.g[flat];
    double denom = std::max(std::max(std::fabs(analytic), std::fabs(numeric)), 1e-8);
    double rel = std::fabs(analytic - numeric) / denom;
    if (rel > rep.max_rel_error) {
      rep.max_rel_error = rel;
      rep.worst_param = p.name;
      rep.worst_index = flat;
      rep.worst_analytic = analytic;
      rep.worst_numeric = numeric;
    }
  }
  return rep;
}

}  // namespace sea
