// diff/tape.hpp
//
// Reverse-mode autodiff on a define-by-run tape.  Each op computes its
// output eagerly and, when any input wants gradients, records a closure
// that scatters the output gradient back to the inputs.  backward() runs
// the closures in reverse creation order, so creation order is the
// topological order and the whole thing stays a few hundred lines.
//
// Conventions:
//   - 1-D tensors are column vectors [C].
//   - 2-D tensors are channels x time [C, T], row-major.
//   - conv1d is causal: the kernel's last tap reads the current column,
//     earlier taps reach back by the dilation, missing history is zero.
//   - Gradients ACCUMULATE; callers zero parameter grads between steps.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "diff/tensor.hpp"

namespace sea {

struct Node {
  Tensor val;
  Tensor grad;  // allocated on first contribution during backward
  bool needs_grad = false;
};

using Val = std::shared_ptr<Node>;

class Tape {
 public:
  // check_finite: scan every op output and throw NumericError on NaN/Inf.
  explicit Tape(bool check_finite = true) : check_finite_(check_finite) {}

  // Leaves.
  Val constant(Tensor t);
  Val param(Parameter& p);  // needs_grad follows p.trainable

  // Elementwise and simple algebra.
  Val add(Val a, Val b);              // same shape
  Val mul(Val a, Val b);              // same shape
  Val scale(Val x, double c);
  Val add_cols(Val x, Val b);         // x [C,T] + b [C] broadcast over t
  Val relu(Val x);
  Val tanh_op(Val x);
  Val sigmoid(Val x);
  Val gated(Val a, Val b);            // tanh(a) * sigmoid(b)

  // Linear maps.
  Val matvec(Val w, Val x);           // w [O,I] * x [I] -> [O]
  Val conv1d(Val x, Val w, int dilation);          // causal, w [Co,Ci,K]
  Val conv1d_strided(Val x, Val w, int stride);    // valid, downsampling
  Val conv1d_transposed(Val x, Val w, int stride); // w [Co,Ci,K], out [Co, F*stride]

  // Lookups and reshapes.
  Val gather_cols(Val w, const std::vector<int>& cols);  // w [C,Q] -> [C,T]
  Val embed_row(Val table, int row);                     // table [S,D] -> [D]
  Val as_column(Val x);                                  // [C] -> [C,1]

  // Reductions and loss.
  Val sum_all(Val x);                  // -> scalar [1]
  Val mean_cols(Val x);                // [C,T] -> [C], mean over time
  // Mean cross-entropy of softmax(logits[:, col_start + i]) against
  // targets[i], i in [0, len(targets)); columns before col_start are
  // evaluated but excluded from the loss.
  Val softmax_xent(Val logits, const std::vector<int>& targets,
                   int col_start = 0);

  // Seeds d(loss)/d(loss) = 1 and runs all closures in reverse.  Scalar
  // losses only; may be called once per tape.
  void backward(const Val& loss);

  size_t node_count() const { return nodes_; }

 private:
  Val make(Tensor val, bool needs_grad);
  void record(std::function<void()> fn) { backs_.push_back(std::move(fn)); }
  void finite_check(const Val& v, const char* op) const;

  std::vector<std::function<void()>> backs_;
  size_t nodes_ = 0;
  bool check_finite_;
  bool backward_done_ = false;
};

// Allocate-on-demand gradient access used by backward closures.
inline double* grad_of(const Val& n) {
  n->grad.shape = n->val.shape;
  if (n->grad.v.empty()) n->grad.v.assign(n->val.v.size(), 0.0);
  return n->grad.v.data();
}

}  // namespace sea
