// diff/adam.cpp

#include "diff/adam.hpp"

#include <cmath>
#include <unordered_set>

#include "common/error.hpp"

namespace sea {

Adam::Adam(std::vector<ParamSet*> sets, AdamConfig cfg) : cfg_(cfg) {
  init(std::move(sets));
}

Adam::Adam(ParamSet& set, AdamConfig cfg) : cfg_(cfg) { init({&set}); }

void Adam::init(std::vector<ParamSet*> sets) {
  check_arg(cfg_.lr > 0.0, "adam: lr must be positive");
  check_arg(cfg_.beta1 >= 0.0 && cfg_.beta1 < 1.0, "adam: beta1 out of range");
  check_arg(cfg_.beta2 >= 0.0 && cfg_.beta2 < 1.0, "adam: beta2 out of range");
  std::unordered_set<std::string> names;
  for (ParamSet* set : sets) {
    for (size_t i = 0; i < set->size(); ++i) {
      Parameter& p = set->at(i);
      if (!p.trainable) continue;
      check_arg(names.insert(p.name).second,
                "adam: duplicate parameter name across sets: " + p.name);
      Slot s;
      s.p = &p;
      s.m.assign(p.t.v.size(), 0.0);
      s.v.assign(p.t.v.size(), 0.0);
      slots_.push_back(std::move(s));
    }
  }
}

void Adam::set_step_count(int64_t t) {
  check_arg(t >= 0, "adam: negative step count");
  t_ = t;
}

void Adam::step() {
  ++t_;
  double b1p = std::pow(cfg_.beta1, static_cast<double>(t_));
  double b2p = std::pow(cfg_.beta2, static_cast<double>(t_));
  double mc = 1.0 / (1.0 - b1p);
  double vc = 1.0 / (1.0 - b2p);
  for (Slot& s : slots_) {
    s.p->t.ensure_grad();
    const double* g = s.p->t.g.data();
    double* pv = s.p->t.v.data();
    double* m = s.m.data();
    double* v = s.v.data();
    size_t n = s.p->t.v.size();
    for (size_t i = 0; i < n; ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      double mh = m[i] * mc;
      double vh = v[i] * vc;
      pv[i] -= cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps);
    }
  }
}

}  // namespace sea
