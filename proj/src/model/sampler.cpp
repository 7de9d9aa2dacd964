// model/sampler.cpp

#include "model/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace sea {

namespace {

// y += W x for row-major W [rows, cols].
inline void matvec_acc(const double* w, const double* x, double* y,
                       int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    double acc = 0.0;
    const double* row = w + static_cast<int64_t>(r) * cols;
    for (int c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] += acc;
  }
}

}  // namespace

Sampler::Sampler(const WaveNet& model) : cfg_(model.config()) {
  const ParamSet& P = model.params();
  int Q = cfg_.quantization, R = cfg_.residual_channels;
  int K = cfg_.kernel_width;

  const Tensor& ew = P.get("entry.w").t;
  const Tensor& eb = P.get("entry.b").t;
  entry_cols_.resize(static_cast<size_t>(Q) * R);
  for (int q = 0; q < Q; ++q)
    for (int r = 0; r < R; ++r)
      entry_cols_[static_cast<size_t>(q) * R + r] = ew.v[r * Q + q] + eb.v[r];

  upsampler_ = P.get("upsampler.w").t.v;

  for (size_t i = 0; i < cfg_.dilation_cycle.size(); ++i) {
    std::string b = "block" + std::to_string(i) + ".";
    int d = cfg_.dilation_cycle[i];
    Block blk;
    auto load_taps = [&](const std::string& name, std::vector<Tap>& taps) {
      const Tensor& w = P.get(name).t;  // [R, R, K]
      for (int k = 0; k < K; ++k) {
        Tap tap;
        tap.offset = (K - 1 - k) * d;
        tap.w.resize(static_cast<size_t>(R) * R);
        for (int co = 0; co < R; ++co)
          for (int ci = 0; ci < R; ++ci)
            tap.w[static_cast<size_t>(co) * R + ci] =
                w.v[(static_cast<int64_t>(co) * R + ci) * K + k];
        blk.max_offset = std::max(blk.max_offset, tap.offset);
        taps.push_back(std::move(tap));
      }
    };
    load_taps(b + "filter.w", blk.filter_taps);
    load_taps(b + "gate.w", blk.gate_taps);
    // 1x1 convs flatten to [R, C] / [Sk, R] matrices.
    blk.filter_loc = P.get(b + "filter.loc").t.v;
    blk.gate_loc = P.get(b + "gate.loc").t.v;
    blk.filter_glob = P.get(b + "filter.glob").t.v;
    blk.gate_glob = P.get(b + "gate.glob").t.v;
    blk.filter_b = P.get(b + "filter.b").t.v;
    blk.gate_b = P.get(b + "gate.b").t.v;
    blk.res_w = P.get(b + "res.w").t.v;
    blk.res_b = P.get(b + "res.b").t.v;
    blk.skip_w = P.get(b + "skip.w").t.v;
    blk.skip_b = P.get(b + "skip.b").t.v;
    blocks_.push_back(std::move(blk));
  }

  head1_w_ = P.get("head1.w").t.v;
  head1_b_ = P.get("head1.b").t.v;
  head2_w_ = P.get("head2.w").t.v;
  head2_b_ = P.get("head2.b").t.v;
}

void Sampler::run(const std::vector<int>* forced, int prev_class,
                  const LocalConditioning& lc,
                  const std::vector<double>& embedding, double temperature,
                  uint64_t seed, std::vector<int>* classes_out,
                  Tensor* logits_out) const {
  int Q = cfg_.quantization, R = cfg_.residual_channels;
  int Sk = cfg_.skip_channels, C = cfg_.cond_channels();
  int D = cfg_.embedding_dim, stride = cfg_.frame_stride;
  check_arg(static_cast<int>(embedding.size()) == D,
            "sampler: embedding dimension mismatch");
  check_arg(lc.features.rank() == 2 && lc.features.shape[0] == C,
            "sampler: conditioning channel mismatch");
  int F = lc.frames();
  int64_t T = static_cast<int64_t>(F) * stride;
  if (forced) {
    check_arg(static_cast<int64_t>(forced->size()) == T,
              "sampler: forced sequence length mismatch");
  }
  check_arg(temperature >= 0.0, "sampler: temperature must be >= 0");
  check_arg(prev_class >= 0 && prev_class < Q, "sampler: prev_class out of range");

  // Upsample local conditioning (bias-free transposed conv), then bake in
  // each block's local projection so the per-sample loop is matvecs only.
  int K2 = 2 * stride;
  std::vector<double> cond(static_cast<size_t>(C) * T, 0.0);
  for (int co = 0; co < C; ++co) {
    double* orow = cond.data() + static_cast<int64_t>(co) * T;
    for (int ci = 0; ci < C; ++ci) {
      const double* xrow = lc.features.v.data() + static_cast<int64_t>(ci) * F;
      const double* wrow =
          upsampler_.data() + (static_cast<int64_t>(co) * C + ci) * K2;
      for (int f = 0; f < F; ++f) {
        double xv = xrow[f];
        int64_t base = static_cast<int64_t>(f) * stride;
        int64_t kmax = std::min<int64_t>(K2, T - base);
        for (int64_t k = 0; k < kmax; ++k) orow[base + k] += wrow[k] * xv;
      }
    }
  }

  size_t nb = blocks_.size();
  std::vector<std::vector<double>> loc_f(nb), loc_g(nb);
  std::vector<std::vector<double>> bias_f(nb), bias_g(nb);
  for (size_t i = 0; i < nb; ++i) {
    const Block& blk = blocks_[i];
    loc_f[i].assign(static_cast<size_t>(R) * T, 0.0);
    loc_g[i].assign(static_cast<size_t>(R) * T, 0.0);
    for (int r = 0; r < R; ++r) {
      const double* wf = blk.filter_loc.data() + static_cast<int64_t>(r) * C;
      const double* wg = blk.gate_loc.data() + static_cast<int64_t>(r) * C;
      double* of = loc_f[i].data() + static_cast<int64_t>(r) * T;
      double* og = loc_g[i].data() + static_cast<int64_t>(r) * T;
      for (int c = 0; c < C; ++c) {
        const double* crow = cond.data() + static_cast<int64_t>(c) * T;
        double vf = wf[c], vg = wg[c];
        for (int64_t t = 0; t < T; ++t) {
          of[t] += vf * crow[t];
          og[t] += vg * crow[t];
        }
      }
    }
    bias_f[i].assign(blk.filter_b.begin(), blk.filter_b.end());
    bias_g[i].assign(blk.gate_b.begin(), blk.gate_b.end());
    matvec_acc(blk.filter_glob.data(), embedding.data(), bias_f[i].data(), R, D);
    matvec_acc(blk.gate_glob.data(), embedding.data(), bias_g[i].data(), R, D);
  }

  // Ring buffers of each block's input columns.
  std::vector<std::vector<double>> rings(nb);
  std::vector<int> ring_size(nb);
  for (size_t i = 0; i < nb; ++i) {
    ring_size[i] = blocks_[i].max_offset + 1;
    rings[i].assign(static_cast<size_t>(ring_size[i]) * R, 0.0);
  }

  if (logits_out) *logits_out = Tensor({Q, T});
  std::vector<int> classes(static_cast<size_t>(T), 0);
  Rng rng(hash_seed(seed, 0x73616d70));

  std::vector<double> x(R), f_pre(R), g_pre(R), z(R), skip(Sk), h1(Sk), logits(Q);
  int prev = prev_class;
  for (int64_t t = 0; t < T; ++t) {
    const double* ecol = entry_cols_.data() + static_cast<size_t>(prev) * R;
    std::copy(ecol, ecol + R, x.begin());
    std::fill(skip.begin(), skip.end(), 0.0);

    for (size_t i = 0; i < nb; ++i) {
      const Block& blk = blocks_[i];
      double* slot = rings[i].data() + static_cast<size_t>(t % ring_size[i]) * R;
      std::copy(x.begin(), x.end(), slot);

      for (int r = 0; r < R; ++r) {
        f_pre[r] = bias_f[i][r] + loc_f[i][static_cast<int64_t>(r) * T + t];
        g_pre[r] = bias_g[i][r] + loc_g[i][static_cast<int64_t>(r) * T + t];
      }
      for (const Tap& tap : blk.filter_taps) {
        if (t < tap.offset) continue;  // zero history
        const double* col =
            rings[i].data() + static_cast<size_t>((t - tap.offset) % ring_size[i]) * R;
        matvec_acc(tap.w.data(), col, f_pre.data(), R, R);
      }
      for (const Tap& tap : blk.gate_taps) {
        if (t < tap.offset) continue;
        const double* col =
            rings[i].data() + static_cast<size_t>((t - tap.offset) % ring_size[i]) * R;
        matvec_acc(tap.w.data(), col, g_pre.data(), R, R);
      }
      for (int r = 0; r < R; ++r) {
        double tv = std::tanh(f_pre[r]);
        double sv = g_pre[r] >= 0.0 ? 1.0 / (1.0 + std::exp(-g_pre[r]))
                                    : std::exp(g_pre[r]) / (1.0 + std::exp(g_pre[r]));
        z[r] = tv * sv;
      }
      for (int r = 0; r < R; ++r) {
        double acc = blk.res_b[r];
        const double* row = blk.res_w.data() + static_cast<int64_t>(r) * R;
        for (int c = 0; c < R; ++c) acc += row[c] * z[c];
        x[r] += acc;
      }
      for (int r = 0; r < Sk; ++r) {
        double acc = blk.skip_b[r];
        const double* row = blk.skip_w.data() + static_cast<int64_t>(r) * R;
        for (int c = 0; c < R; ++c) acc += row[c] * z[c];
        skip[r] += acc;
      }
    }

    for (int r = 0; r < Sk; ++r) skip[r] = skip[r] > 0.0 ? skip[r] : 0.0;
    for (int r = 0; r < Sk; ++r) {
      double acc = head1_b_[r];
      const double* row = head1_w_.data() + static_cast<int64_t>(r) * Sk;
      for (int c = 0; c < Sk; ++c) acc += row[c] * skip[c];
      h1[r] = acc > 0.0 ? acc : 0.0;
    }
    for (int q = 0; q < Q; ++q) {
      double acc = head2_b_[q];
      const double* row = head2_w_.data() + static_cast<int64_t>(q) * Sk;
      for (int c = 0; c < Sk; ++c) acc += row[c] * h1[c];
      logits[q] = acc;
    }

    if (logits_out)
      for (int q = 0; q < Q; ++q) logits_out->v[static_cast<int64_t>(q) * T + t] = logits[q];

    int cls;
    if (forced) {
      cls = (*forced)[static_cast<size_t>(t)];
      check_arg(cls >= 0 && cls < Q, "sampler: forced class out of range");
    } else if (temperature == 0.0) {
      cls = 0;
      for (int q = 1; q < Q; ++q)
        if (logits[q] > logits[cls]) cls = q;
    } else {
      double mx = logits[0] / temperature;
      for (int q = 1; q < Q; ++q) mx = std::max(mx, logits[q] / temperature);
      double zsum = 0.0;
      for (int q = 0; q < Q; ++q) {
        double p = std::exp(logits[q] / temperature - mx);
        logits[q] = p;  // reuse as unnormalized probs
        zsum += p;
      }
      check_numeric(zsum > 0.0 && std::isfinite(zsum),
                    "sampler: degenerate softmax");
      double u = rng.uniform() * zsum;
      double acc = 0.0;
      cls = Q - 1;
      for (int q = 0; q < Q; ++q) {
        acc += logits[q];
        if (u < acc) {
          cls = q;
          break;
        }
      }
    }
    classes[static_cast<size_t>(t)] = cls;
    prev = cls;
  }

  if (classes_out) *classes_out = classes;
}

Waveform Sampler::sample(const LocalConditioning& lc,
                         const std::vector<double>& embedding,
                         double temperature, uint64_t seed, int sample_rate,
                         std::vector<int>* classes_out) const {
  std::vector<int> classes;
  run(nullptr, cfg_.quantization / 2, lc, embedding, temperature, seed,
      &classes, nullptr);
  if (classes_out) *classes_out = classes;
  QuantizedWaveform q;
  q.classes = std::move(classes);
  q.quantization = cfg_.quantization;
  q.sample_rate = sample_rate;
  return mulaw_decode(q, cfg_.quantization - 1);
}

Tensor Sampler::teacher_forced_logits(const std::vector<int>& target_classes,
                                      int prev_class,
                                      const LocalConditioning& lc,
                                      const std::vector<double>& embedding) const {
  // Shift: input at t is target[t-1], position 0 gets prev_class; in
  // forced mode the drawn class is replaced by the true target, which
  // reproduces exactly the shifted teacher-forcing input of forward().
  Tensor logits;
  run(&target_classes, prev_class, lc, embedding, 0.0, 0, nullptr, &logits);
  return logits;
}

}  // namespace sea
