// diff/tape.cpp

#include "diff/tape.hpp"

#include <cmath>
#include <cstring>

#include "common/error.hpp"

namespace sea {

namespace {

inline double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline bool has_grad_flow(const Val& v) { return !v->grad.v.empty(); }

}  // namespace

Val Tape::make(Tensor val, bool needs_grad) {
  auto n = std::make_shared<Node>();
  n->val = std::move(val);
  n->needs_grad = needs_grad;
  ++nodes_;
  return n;
}

void Tape::finite_check(const Val& v, const char* op) const {
  if (!check_finite_) return;
  check_numeric(v->val.all_finite(),
                std::string("non-finite values produced by ") + op);
}

Val Tape::constant(Tensor t) {
  Val n = make(std::move(t), false);
  finite_check(n, "constant");
  return n;
}

Val Tape::param(Parameter& p) {
  Tensor t;
  t.shape = p.t.shape;
  t.v = p.t.v;
  Val n = make(std::move(t), p.trainable);
  finite_check(n, ("param " + p.name).c_str());
  if (p.trainable) {
    Parameter* pp = &p;
    record([n, pp] {
      if (!has_grad_flow(n)) return;
      pp->t.ensure_grad();
      const double* g = n->grad.v.data();
      double* dst = pp->t.g.data();
      for (size_t i = 0; i < n->grad.v.size(); ++i) dst[i] += g[i];
    });
  }
  return n;
}

Val Tape::add(Val a, Val b) {
  check_arg(a->val.shape == b->val.shape,
            "add: shape mismatch " + shape_str(a->val) + " vs " + shape_str(b->val));
  Tensor out;
  out.shape = a->val.shape;
  out.v.resize(a->val.v.size());
  const double* pa = a->val.v.data();
  const double* pb = b->val.v.data();
  double* po = out.v.data();
  for (size_t i = 0; i < out.v.size(); ++i) po[i] = pa[i] + pb[i];
  bool ng = a->needs_grad || b->needs_grad;
  Val n = make(std::move(out), ng);
  finite_check(n, "add");
  if (ng) {
    record([n, a, b] {
      if (!has_grad_flow(n)) return;
      const double* g = n->grad.v.data();
      size_t sz = n->grad.v.size();
      if (a->needs_grad) {
        double* ga = grad_of(a);
        for (size_t i = 0; i < sz; ++i) ga[i] += g[i];
      }
      if (b->needs_grad) {
        double* gb = grad_of(b);
        for (size_t i = 0; i < sz; ++i) gb[i] += g[i];
      }
    });
  }
  return n;
}

Val Tape::mul(Val a, Val b) {
  check_arg(a->val.shape == b->val.shape,
            "mul: shape mismatch " + shape_str(a->val) + " vs " + shape_str(b->val));
  Tensor out;
  out.shape = a->val.shape;
  out.v.resize(a->val.v.size());
  const double* pa = a->val.v.data();
  const double* pb = b->val.v.data();
  double* po = out.v.data();
  for (size_t i = 0; i < out.v.size(); ++i) po[i] = pa[i] * pb[i];
  bool ng = a->needs_grad || b->needs_grad;
  Val n = make(std::move(out), ng);
  finite_check(n, "mul");
  if (ng) {
    record([n, a, b] {
      if (!has_grad_flow(n)) return;
      const double* g = n->grad.v.data();
      size_t sz = n->grad.v.size();
      if (a->needs_grad) {
        double* ga = grad_of(a);
        const double* pb = b->val.v.data();
        for (size_t i = 0; i < sz; ++i) ga[i] += g[i] * pb[i];
      }
      if (b->needs_grad) {
        double* gb = grad_of(b);
        const double* pa = a->val.v.data();
        for (size_t i = 0; i < sz; ++i) gb[i] += g[i] * pa[i];
      }
    });
  }
  return n;
}

Val Tape::scale(Val x, double c) {
  Tensor out;
  out.shape = x->val.shape;
  out.v.resize(x->val.v.size());
  const double* px = x->val.v.data();
  double* po = out.v.data();
  for (size_t i = 0; i < out.v.size(); ++i) po[i] = c * px[i];
  Val n = make(std::move(out), x->needs_grad);
  finite_check(n, "scale");
  if (n->needs_grad) {
    record([n, x, c] {
      if (!has_grad_flow(n)) return;
      const double* g = n->grad.v.data();
      double* gx = grad_of(x);
      for (size_t i = 0; i < n->grad.v.size(); ++i) gx[i] += c * g[i];
    });
  }
  return n;
}

Val Tape::add_cols(Val x, Val b) {
  check_arg(x->val.rank() == 2 && b->val.rank() == 1 &&
                x->val.dim(0) == b->val.dim(0),
            "add_cols: need [C,T] and [C]");
  int64_t C = x->val.dim(0), T = x->val.dim(1);
  Tensor out;
  out.shape = x->val.shape;
  out.v.resize(x->val.v.size());
  const double* px = x->val.v.data();
  const double* pb = b->val.v.data();
  double* po = out.v.data();
  for (int64_t c = 0; c < C; ++c) {
    double bv = pb[c];
    for (int64_t t = 0; t < T; ++t) po[c * T + t] = px[c * T + t] + bv;
  }
  bool ng = x->needs_grad || b->needs_grad;
  Val n = make(std::move(out), ng);
  finite_check(n, "add_cols");
  if (ng) {
    record([n, x, b, C, T] {
      if (!has_grad_flow(n)) return;
      const double* g = n->grad.v.data();
      if (x->needs_grad) {
        double* gx = grad_of(x);
        for (size_t i = 0; i < n->grad.v.size(); ++i) gx[i] += g[i];
      }
      if (b->needs_grad) {
        double* gb = grad_of(b);
        for (int64_t c = 0; c < C; ++c) {
          double acc = 0.0;
          for (int64_t t = 0; t < T; ++t) acc += g[c * T + t];
          gb[c] += acc;
        }
      }
    });
  }
  return n;
}

Val Tape::relu(Val x) {
  Tensor out;
  out.shape = x->val.shape;
  out.v.resize(x->val.v.size());
  const double* px = x->val.v.data();
  double* po = out.v.data();
  for (size_t i = 0; i < out.v.size(); ++i) po[i] = px[i] > 0.0 ? px[i] : 0.0;
  Val n = make(std::move(out), x->needs_grad);
  finite_check(n, "relu");
  if (n->needs_grad) {
    record([n, x] {
      if (!has_grad_flow(n)) return;
      const double* g = n->grad.v.data();
      const double* px = x->val.v.data();
      double* gx = grad_of(x);
      for (size_t i = 0; i < n->grad.v.size(); ++i)
        if (px[i] > 0.0) gx[i] += g[i];
    });
  }
  return n;
}

Val Tape::tanh_op(Val x) {
  Tensor out;
  out.shape = x->val.shape;
  out.v.resize(x->val.v.size());
  const double* px = x->val.v.data();
  double* po = out.v.data();
  for (size_t i = 0; i < out.v.size(); ++i) po[i] = std::tanh(px[i]);
  Val n = make(std::move(out), x->needs_grad);
  finite_check(n, "tanh");
  if (n->needs_grad) {
    record([n, x] {
      if (!has_grad_flow(n)) return;
      const double* g = n->grad.v.data();
      const double* po = n->val.v.data();
      double* gx = grad_of(x);
      for (size_t i = 0; i < n->grad.v.size(); ++i)
        gx[i] += g[i] * (1.0 - po[i] * po[i]);
    });
  }
  return n;
}

Val Tape::sigmoid(Val x) {
  Tensor out;
  out.shape = x->val.shape;
  out.v.resize(x->val.v.size());
  const double* px = x->val.v.data();
  double* po = out.v.data();
  for (size_t i = 0; i < out.v.size(); ++i) po[i] = sigmoid_scalar(px[i]);
  Val n = make(std::move(out), x->needs_grad);
  finite_check(n, "sigmoid");
  if (n->needs_grad) {
    record([n, x] {
      if (!has_grad_flow(n)) return;
      const double* g = n->grad.v.data();
      const double* po = n->val.v.data();
      double* gx = grad_of(x);
      for (size_t i = 0; i < n->grad.v.size(); ++i)
        gx[i] += g[i] * po[i] * (1.0 - po[i]);
    });
  }
  return n;
}

Val Tape::gated(Val a, Val b) {
  check_arg(a->val.shape == b->val.shape, "gated: shape mismatch");
  size_t sz = a->val.v.size();
  auto ta = std::make_shared<std::vector<double>>(sz);
  auto sb = std::make_shared<std::vector<double>>(sz);
  Tensor out;
  out.shape = a->val.shape;
  out.v.resize(sz);
  const double* pa = a->val.v.data();
  const double* pb = b->val.v.data();
  double* po = out.v.data();
  for (size_t i = 0; i < sz; ++i) {
    double t = std::tanh(pa[i]);
    double s = sigmoid_scalar(pb[i]);
    (*ta)[i] = t;
    (*sb)[i] = s;
    po[i] = t * s;
  }
  bool ng = a->needs_grad || b->needs_grad;
  Val n = make(std::move(out), ng);
  finite_check(n, "gated");
  if (ng) {
    record([n, a, b, ta, sb] {
      if (!has_grad_flow(n)) return;
      const double* g = n->grad.v.data();
      size_t sz = n->grad.v.size();
      if (a->needs_grad) {
        double* ga = grad_of(a);
        for (size_t i = 0; i < sz; ++i)
          ga[i] += g[i] * (*sb)[i] * (1.0 - (*ta)[i] * (*ta)[i]);
      }
      if (b->needs_grad) {
        double* gb = grad_of(b);
        for (size_t i = 0; i < sz; ++i)
          gb[i] += g[i] * (*ta)[i] * (*sb)[i] * (1.0 - (*sb)[i]);
      }
    });
  }
  return n;
}

Val Tape::matvec(Val w, Val x) {
  check_arg(w->val.rank() == 2 && x->val.rank() == 1 &&
                w->val.dim(1) == x->val.dim(0),
            "matvec: need [O,I] and [I]");
  int64_t O = w->val.dim(0), I = w->val.dim(1);
  Tensor out;
  out.shape = {O};
  out.v.resize(static_cast<size_t>(O));
  const double* pw = w->val.v.data();
  const double* px = x->val.v.data();
  double* po = out.v.data();
  for (int64_t o = 0; o < O; ++o) {
    double acc = 0.0;
    const double* row = pw + o * I;
    for (int64_t i = 0; i < I; ++i) acc += row[i] * px[i];
    po[o] = acc;
  }
  bool ng = w->needs_grad || x->needs_grad;
  Val n = make(std::move(out), ng);
  finite_check(n, "matvec");
  if (ng) {
    record([n, w, x, O, I] {
      if (!has_grad_flow(n)) return;
      const double* g = n->grad.v.data();
      if (w->needs_grad) {
        double* gw = grad_of(w);
        const double* px = x->val.v.data();
        for (int64_t o = 0; o < O; ++o) {
          double go = g[o];
          double* row = gw + o * I;
          for (int64_t i = 0; i < I; ++i) row[i] += go * px[i];
        }
      }
      if (x->needs_grad) {
        double* gx = grad_of(x);
        const double* pw = w->val.v.data();
        for (int64_t o = 0; o < O; ++o) {
          double go = g[o];
          const double* row = pw + o * I;
          for (int64_t i = 0; i < I; ++i) gx[i] += go * row[i];
        }
      }
    });
  }
  return n;
}

Val Tape::conv1d(Val x, Val w, int dilation) {
  check_arg(x->val.rank() == 2 && w->val.rank() == 3,
            "conv1d: need x [Ci,T] and w [Co,Ci,K]");
  check_arg(dilation >= 1, "conv1d: dilation must be >= 1");
  int64_t Ci = x->val.dim(0), T = x->val.dim(1);
  int64_t Co = w->val.dim(0), K = w->val.dim(2);
  check_arg(w->val.dim(1) == Ci, "conv1d: channel mismatch");
  Tensor out;
  out.shape = {Co, T};
  out.v.assign(static_cast<size_t>(Co * T), 0.0);
  const double* px = x->val.v.data();
  const double* pw = w->val.v.data();
  double* po = out.v.data();
  for (int64_t co = 0; co < Co; ++co) {
    double* orow = po + co * T;
    for (int64_t ci = 0; ci < Ci; ++ci) {
      const double* xrow = px + ci * T;
      const double* wrow = pw + (co * Ci + ci) * K;
      for (int64_t k = 0; k < K; ++k) {
        double wv = wrow[k];
        int64_t off = (K - 1 - k) * dilation;
        for (int64_t t = off; t < T; ++t) orow[t] += wv * xrow[t - off];
      }
    }
  }
  bool ng = x->needs_grad || w->needs_grad;
  Val n = make(std::move(out), ng);
  finite_check(n, "conv1d");
  if (ng) {
    int64_t d = dilation;
    record([n, x, w, Ci, T, Co, K, d] {
      if (!has_grad_flow(n)) return;
      const double* g = n->grad.v.data();
      const double* px = x->val.v.data();
      const double* pw = w->val.v.data();
      if (x->needs_grad) {
        double* gx = grad_of(x);
        for (int64_t co = 0; co < Co; ++co) {
          const double* grow = g + co * T;
          for (int64_t ci = 0; ci < Ci; ++ci) {
            double* gxrow = gx + ci * T;
            const double* wrow = pw + (co * Ci + ci) * K;
            for (int64_t k = 0; k < K; ++k) {
              double wv = wrow[k];
              int64_t off = (K - 1 - k) * d;
              for (int64_t t = off; t < T; ++t) gxrow[t - off] += wv * grow[t];
            }
          }
        }
      }
      if (w->needs_grad) {
        double* gw = grad_of(w);
        for (int64_t co = 0; co < Co; ++co) {
          const double* grow = g + co * T;
          for (int64_t ci = 0; ci < Ci; ++ci) {
            const double* xrow = px + ci * T;
            double* gwrow = gw + (co * Ci + ci) * K;
            for (int64_t k = 0; k < K; ++k) {
              int64_t off = (K - 1 - k) * d;
              double acc = 0.0;
              for (int64_t t = off; t < T; ++t) acc += grow[t] * xrow[t - off];
              gwrow[k] += acc;
            }
          }
        }
      }
    });
  }
  return n;
}

Val Tape::conv1d_strided(Val x, Val w, int stride) {
  check_arg(x->val.rank() == 2 && w->val.rank() == 3,
            "conv1d_strided: need x [Ci,T] and w [Co,Ci,K]");
  check_arg(stride >= 1, "conv1d_strided: stride must be >= 1");
  int64_t Ci = x->val.dim(0), T = x->val.dim(1);
  int64_t Co = w->val.dim(0), K = w->val.dim(2);
  check_arg(w->val.dim(1) == Ci, "conv1d_strided: channel mismatch");
  check_arg(T >= K, "conv1d_strided: input shorter than kernel");
  int64_t F = (T - K) / stride + 1;
  Tensor out;
  out.shape = {Co, F};
  out.v.assign(static_cast<size_t>(Co * F), 0.0);
  const double* px = x->val.v.data();
  const double* pw = w->val.v.data();
  double* po = out.v.data();
  for (int64_t co = 0; co < Co; ++co) {
    double* orow = po + co * F;
    for (int64_t ci = 0; ci < Ci; ++ci) {
      const double* xrow = px + ci * T;
      const double* wrow = pw + (co * Ci + ci) * K;
      for (int64_t f = 0; f < F; ++f) {
        const double* xat = xrow + f * stride;
        double acc = 0.0;
        for (int64_t k = 0; k < K; ++k) acc += wrow[k] * xat[k];
        orow[f] += acc;
      }
    }
  }
  bool ng = x->needs_grad || w->needs_grad;
  Val n = make(std::move(out), ng);
  finite_check(n, "conv1d_strided");
  if (ng) {
    int64_t s = stride;
    record([n, x, w, Ci, T, Co, K, F, s] {
      if (!has_grad_flow(n)) return;
      const double* g = n->grad.v.data();
      const double* px = x->val.v.data();
      const double* pw = w->val.v.data();
      for (int64_t co = 0; co < Co; ++co) {
        const double* grow = g + co * F;
        for (int64_t ci = 0; ci < Ci; ++ci) {
          const double* wrow = pw + (co * Ci + ci) * K;
          const double* xrow = px + ci * T;
          if (x->needs_grad) {
            double* gxrow = grad_of(x) + ci * T;
            for (int64_t f = 0; f < F; ++f) {
              double gv = grow[f];
              double* gxat = gxrow + f * s;
              for (int64_t k = 0; k < K; ++k) gxat[k] += wrow[k] * gv;
            }
          }
          if (w->needs_grad) {
            double* gwrow = grad_of(w) + (co * Ci + ci) * K;
            for (int64_t k = 0; k < K; ++k) {
              double acc = 0.0;
              for (int64_t f = 0; f < F; ++f) acc += grow[f] * xrow[f * s + k];
              gwrow[k] += acc;
            }
          }
        }
      }
    });
  }
  return n;
}

Val Tape::conv1d_transposed(Val x, Val w, int stride) {
  check_arg(x->val.rank() == 2 && w->val.rank() == 3,
            "conv1d_transposed: need x [Ci,F] and w [Co,Ci,K]");
  check_arg(stride >= 1, "conv1d_transposed: stride must be >= 1");
  int64_t Ci = x->val.dim(0), F = x->val.dim(1);
  int64_t Co = w->val.dim(0), K = w->val.dim(2);
  check_arg(w->val.dim(1) == Ci, "conv1d_transposed: channel mismatch");
  int64_t Tout = F * stride;
  Tensor out;
  out.shape = {Co, Tout};
  out.v.assign(static_cast<size_t>(Co * Tout), 0.0);
  const double* px = x->val.v.data();
  const double* pw = w->val.v.data();
  double* po = out.v.data();
  for (int64_t co = 0; co < Co; ++co) {
    double* orow = po + co * Tout;
    for (int64_t ci = 0; ci < Ci; ++ci) {
      const double* xrow = px + ci * F;
      const double* wrow = pw + (co * Ci + ci) * K;
      for (int64_t f = 0; f < F; ++f) {
        double xv = xrow[f];
        int64_t base = f * stride;
        int64_t kmax = std::min(K, Tout - base);
        for (int64_t k = 0; k < kmax; ++k) orow[base + k] += wrow[k] * xv;
      }
    }
  }
  bool ng = x->needs_grad || w->needs_grad;
  Val n = make(std::move(out), ng);
  finite_check(n, "conv1d_transposed");
  if (ng) {
    int64_t s = stride;
    record([n, x, w, Ci, F, Co, K, Tout, s] {
      if (!has_grad_flow(n)) return;
      const double* g = n->grad.v.data();
      const double* px = x->val.v.data();
      const double* pw = w->val.v.data();
      for (int64_t co = 0; co < Co; ++co) {
        const double* grow = g + co * Tout;
        for (int64_t ci = 0; ci < Ci; ++ci) {
          const double* wrow = pw + (co * Ci + ci) * K;
          const double* xrow = px + ci * F;
          if (x->needs_grad) {
            double* gxrow = grad_of(x) + ci * F;
            for (int64_t f = 0; f < F; ++f) {
              int64_t base = f * s;
              int64_t kmax = std::min(K, Tout - base);
              double acc = 0.0;
              for (int64_t k = 0; k < kmax; ++k) acc += wrow[k] * grow[base + k];
              gxrow[f] += acc;
            }
          }
          if (w->needs_grad) {
            double* gwrow = grad_of(w) + (co * Ci + ci) * K;
            for (int64_t f = 0; f < F; ++f) {
              double xv = xrow[f];
              int64_t base = f * s;
              int64_t kmax = std::min(K, Tout - base);
              for (int64_t k = 0; k < kmax; ++k) gwrow[k] += grow[base + k] * xv;
            }
          }
        }
      }
    });
  }
  return n;
}

Val Tape::gather_cols(Val w, const std::vector<int>& cols) {
  check_arg(w->val.rank() == 2, "gather_cols: need w [C,Q]");
  int64_t C = w->val.dim(0), Q = w->val.dim(1);
  int64_t T = static_cast<int64_t>(cols.size());
  check_arg(T > 0, "gather_cols: empty column list");
  for (int c : cols)
    check_arg(c >= 0 && c < Q, "gather_cols: column index out of range");
  Tensor out;
  out.shape = {C, T};
  out.v.resize(static_cast<size_t>(C * T));
  const double* pw = w->val.v.data();
  double* po = out.v.data();
  for (int64_t c = 0; c < C; ++c) {
    const double* wrow = pw + c * Q;
    double* orow = po + c * T;
    for (int64_t t = 0; t < T; ++t) orow[t] = wrow[cols[t]];
  }
  Val n = make(std::move(out), w->needs_grad);
  finite_check(n, "gather_cols");
  if (n->needs_grad) {
    auto idx = std::make_shared<std::vector<int>>(cols);
    record([n, w, idx, C, Q, T] {
      if (!has_grad_flow(n)) return;
      const double* g = n->grad.v.data();
      double* gw = grad_of(w);
      for (int64_t c = 0; c < C; ++c) {
        double* gwrow = gw + c * Q;
        const double* grow = g + c * T;
        for (int64_t t = 0; t < T; ++t) gwrow[(*idx)[t]] += grow[t];
      }
    });
  }
  return n;
}

Val Tape::embed_row(Val table, int row) {
  check_arg(table->val.rank() == 2, "embed_row: need table [S,D]");
  int64_t S = table->val.dim(0), D = table->val.dim(1);
  check_arg(row >= 0 && row < S, "embed_row: row index out of range");
  Tensor out;
  out.shape = {D};
  out.v.assign(table->val.v.begin() + row * D,
               table->val.v.begin() + (row + 1) * D);
  Val n = make(std::move(out), table->needs_grad);
  finite_check(n, "embed_row");
  if (n->needs_grad) {
    record([n, table, row, D] {
      if (!has_grad_flow(n)) return;
      const double* g = n->grad.v.data();
      double* gt = grad_of(table) + static_cast<int64_t>(row) * D;
      for (int64_t i = 0; i < D; ++i) gt[i] += g[i];
    });
  }
  return n;
}

Val Tape::as_column(Val x) {
  check_arg(x->val.rank() == 1, "as_column: need a vector [C]");
  Tensor out;
  out.shape = {x->val.dim(0), 1};
  out.v = x->val.v;
  Val n = make(std::move(out), x->needs_grad);
  if (n->needs_grad) {
    record([n, x] {
      if (!has_grad_flow(n)) return;
      const double* g = n->grad.v.data();
      double* gx = grad_of(x);
      for (size_t i = 0; i < n->grad.v.size(); ++i) gx[i] += g[i];
    });
  }
  return n;
}

Val Tape::sum_all(Val x) {
  double acc = 0.0;
  for (double v : x->val.v) acc += v;
  Tensor out;
  out.shape = {1};
  out.v = {acc};
  Val n = make(std::move(out), x->needs_grad);
  finite_check(n, "sum_all");
  if (n->needs_grad) {
    record([n, x] {
      if (!has_grad_flow(n)) return;
      double g = n->grad.v[0];
      double* gx = grad_of(x);
      for (size_t i = 0; i < x->val.v.size(); ++i) gx[i] += g;
    });
  }
  return n;
}

Val Tape::mean_cols(Val x) {
  check_arg(x->val.rank() == 2, "mean_cols: need [C,T]");
  int64_t C = x->val.dim(0), T = x->val.dim(1);
  Tensor out;
  out.shape = {C};
  out.v.resize(static_cast<size_t>(C));
  const double* px = x->val.v.data();
  for (int64_t c = 0; c < C; ++c) {
    double acc = 0.0;
    const double* row = px + c * T;
    for (int64_t t = 0; t < T; ++t) acc += row[t];
    out.v[c] = acc / static_cast<double>(T);
  }
  Val n = make(std::move(out), x->needs_grad);
  finite_check(n, "mean_cols");
  if (n->needs_grad) {
    record([n, x, C, T] {
      if (!has_grad_flow(n)) return;
      const double* g = n->grad.v.data();
      double* gx = grad_of(x);
      double inv = 1.0 / static_cast<double>(T);
      for (int64_t c = 0; c < C; ++c) {
        double gv = g[c] * inv;
        double* row = gx + c * T;
        for (int64_t t = 0; t < T; ++t) row[t] += gv;
      }
    });
  }
  return n;
}

Val Tape::softmax_xent(Val logits, const std::vector<int>& targets,
                       int col_start) {
  check_arg(logits->val.rank() == 2, "softmax_xent: need logits [Q,T]");
  int64_t Q = logits->val.dim(0), T = logits->val.dim(1);
  int64_t n_t = static_cast<int64_t>(targets.size());
  check_arg(n_t > 0, "softmax_xent: empty target list");
  check_arg(col_start >= 0 && col_start + n_t == T,
            "softmax_xent: targets must cover columns col_start..T-1");
  for (int t : targets)
    check_arg(t >= 0 && t < Q, "softmax_xent: target class out of range");

  const double* pl = logits->val.v.data();
  bool ng = logits->needs_grad;
  // Probabilities are only kept when a backward pass will need them.
  auto probs = std::make_shared<std::vector<double>>();
  if (ng) probs->resize(static_cast<size_t>(Q * n_t));

  double loss = 0.0;
  std::vector<double> col(static_cast<size_t>(Q));
  for (int64_t i = 0; i < n_t; ++i) {
    int64_t j = col_start + i;
    double mx = -1e308;
    for (int64_t c = 0; c < Q; ++c) {
      col[c] = pl[c * T + j];
      if (col[c] > mx) mx = col[c];
    }
    double z = 0.0;
    for (int64_t c = 0; c < Q; ++c) z += std::exp(col[c] - mx);
    double logz = std::log(z) + mx;
    loss += logz - col[targets[i]];
    if (ng) {
      double* pcol = probs->data() + i * Q;
      for (int64_t c = 0; c < Q; ++c) pcol[c] = std::exp(col[c] - logz);
    }
  }
  loss /= static_cast<double>(n_t);

  Tensor out;
  out.shape = {1};
  out.v = {loss};
  Val n = make(std::move(out), ng);
  finite_check(n, "softmax_xent");
  if (ng) {
    auto tgt = std::make_shared<std::vector<int>>(targets);
    record([n, logits, probs, tgt, Q, T, n_t, col_start] {
      if (!has_grad_flow(n)) return;
      double g = n->grad.v[0] / static_cast<double>(n_t);
      double* gl = grad_of(logits);
      for (int64_t i = 0; i < n_t; ++i) {
        int64_t j = col_start + i;
        const double* pcol = probs->data() + i * Q;
        for (int64_t c = 0; c < Q; ++c) gl[c * T + j] += g * pcol[c];
        gl[static_cast<int64_t>((*tgt)[i]) * T + j] -= g;
      }
    });
  }
  return n;
}

void Tape::backward(const Val& loss) {
  check_arg(loss->val.numel() == 1,
            "backward: loss must be a scalar, got " + shape_str(loss->val));
  check_arg(!backward_done_, "backward: tape already consumed");
  backward_done_ = true;
  loss->grad.shape = loss->val.shape;
  loss->grad.v = {1.0};
  for (auto it = backs_.rbegin(); it != backs_.rend(); ++it) (*it)();
}

}  // namespace sea
