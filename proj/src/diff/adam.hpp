// diff/adam.hpp
//
// Adam with bias correction.  Moment buffers exist only for parameters
// that were trainable at construction; frozen parameters are never
// touched.  The bias powers are recomputed from the step counter each
// step, so an optimizer restored from a checkpoint continues bit-exactly.

#pragma once

#include <cstdint>
#include <vector>

#include "diff/tensor.hpp"

namespace sea {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<ParamSet*> sets, AdamConfig cfg);
  Adam(ParamSet& set, AdamConfig cfg);

  // Applies one update from the gradients currently stored in the
  // parameters.  Does not zero them.
  void step();

  int64_t step_count() const { return t_; }
  void set_step_count(int64_t t);

  struct Slot {
    Parameter* p;
    std::vector<double> m;
    std::vector<double> v;
  };
  std::vector<Slot>& slots() { return slots_; }
  const std::vector<Slot>& slots() const { return slots_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  void init(std::vector<ParamSet*> sets);
  AdamConfig cfg_;
  int64_t t_ = 0;
  std::vector<Slot> slots_;
};

}  // namespace sea
