// model/wavenet.cpp

#include "model/wavenet.hpp"

#include <cmath>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace sea {

const char* WaveNet::kEmbeddingName = "embedding";

int WaveNetConfig::receptive_field() const {
  int sum = 0;
  for (int d : dilation_cycle) sum += d;
  return 1 + (kernel_width - 1) * sum;
}

void WaveNetConfig::validate() const {
  check_arg(quantization >= 2, "wavenet: quantization must be >= 2");
  check_arg(residual_channels > 0 && skip_channels > 0,
            "wavenet: channel counts must be positive");
  check_arg(!dilation_cycle.empty(), "wavenet: empty dilation cycle");
  for (int d : dilation_cycle)
    check_arg(d >= 1, "wavenet: dilations must be >= 1");
  check_arg(kernel_width >= 2, "wavenet: kernel width must be >= 2");
  check_arg(embedding_dim > 0, "wavenet: embedding_dim must be positive");
  check_arg(frame_stride > 0, "wavenet: frame_stride must be positive");
  check_arg(num_speakers >= 1, "wavenet: need at least one speaker");
}

LocalConditioning make_local_conditioning(const Utterance& u,
                                          const SpeakerF0Stats& stats) {
  int F = u.frames();
  int C = kPhonemeClasses + 2;
  LocalConditioning lc;
  lc.frame_stride = u.frame_stride;
  lc.features = Tensor({C, F});
  std::vector<double> f0n = normalize_f0(u.f0_hz, stats);
  for (int f = 0; f < F; ++f) {
    lc.features.at2(u.phoneme_codes[f], f) = 1.0;
    lc.features.at2(kPhonemeClasses, f) = f0n[f];
    lc.features.at2(kPhonemeClasses + 1, f) = u.voiced(f) ? 1.0 : 0.0;
  }
  return lc;
}

namespace {

Tensor randn(std::vector<int64_t> shape, double sd, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.v) v = sd * rng.normal();
  return t;
}

double kaiming(int64_t fan_in) { return std::sqrt(2.0 / static_cast<double>(fan_in)); }

}  // namespace

void WaveNet::build_params(uint64_t seed) {
  Rng rng(seed);
  int Q = cfg_.quantization, R = cfg_.residual_channels, Sk = cfg_.skip_channels;
  int D = cfg_.embedding_dim, K = cfg_.kernel_width, C = cfg_.cond_channels();
  int S = cfg_.num_speakers;

  params_.add(kEmbeddingName, randn({S, D}, 0.1, rng));
  params_.add("entry.w", randn({R, Q}, kaiming(1), rng));
  params_.add("entry.b", Tensor({R}));
  params_.add("upsampler.w",
              randn({C, C, 2 * cfg_.frame_stride}, kaiming(C * 2), rng));

  for (size_t i = 0; i < cfg_.dilation_cycle.size(); ++i) {
    std::string b = "block" + std::to_string(i) + ".";
    for (const char* path : {"filter.", "gate."}) {
      std::string p = b + path;
      params_.add(p + "w", randn({R, R, K}, kaiming(R * K), rng));
      params_.add(p + "loc", randn({R, C, 1}, kaiming(C), rng));
      params_.add(p + "glob", randn({R, D}, kaiming(D), rng));
      params_.add(p + "b", Tensor({R}));
    }
    params_.add(b + "res.w", randn({R, R, 1}, kaiming(R), rng));
    params_.add(b + "res.b", Tensor({R}));
    params_.add(b + "skip.w", randn({Sk, R, 1}, kaiming(R), rng));
    params_.add(b + "skip.b", Tensor({Sk}));
  }

  params_.add("head1.w", randn({Sk, Sk, 1}, kaiming(Sk), rng));
  params_.add("head1.b", Tensor({Sk}));
  // Zero so the untrained model is exactly uniform.
  params_.add("head2.w", Tensor({Q, Sk, 1}));
  params_.add("head2.b", Tensor({Q}));
}

WaveNet::WaveNet(WaveNetConfig cfg, uint64_t init_seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  build_params(init_seed);
}

WaveNet::WaveNet(WaveNetConfig cfg, ParamSet params)
    : cfg_(std::move(cfg)), params_(std::move(params)) {
  cfg_.validate();
  // Shape-check everything against a freshly built skeleton.
  WaveNet ref(cfg_, 0);
  check_arg(params_.size() == ref.params_.size(),
            "wavenet: checkpoint parameter count mismatch");
  for (size_t i = 0; i < params_.size(); ++i) {
    const Parameter& got = params_.at(i);
    check_arg(ref.params_.has(got.name),
              "wavenet: unexpected parameter " + got.name);
    check_arg(ref.params_.get(got.name).t.shape == got.t.shape,
              "wavenet: shape mismatch for " + got.name);
  }
}

Val WaveNet::upsample(Tape& tape, Val local_features) const {
  check_arg(local_features->val.rank() == 2 &&
                local_features->val.dim(0) == cfg_.cond_channels(),
            "upsample: conditioning channel mismatch");
  Val w = tape.param(const_cast<Parameter&>(params_.get("upsampler.w")));
  return tape.conv1d_transposed(local_features, w, cfg_.frame_stride);
}

Val WaveNet::forward(Tape& tape, const std::vector<int>& target_classes,
                     int prev_class, Val local_features, Val embedding) const {
  auto& P = const_cast<ParamSet&>(params_);
  int64_t T = static_cast<int64_t>(target_classes.size());
  check_arg(T > 0, "forward: empty input");
  check_arg(static_cast<int64_t>(local_features->val.dim(1)) * cfg_.frame_stride == T,
            "forward: conditioning does not cover the waveform");
  check_arg(embedding->val.rank() == 1 &&
                embedding->val.dim(0) == cfg_.embedding_dim,
            "forward: embedding dimension mismatch");
  check_arg(prev_class >= 0 && prev_class < cfg_.quantization,
            "forward: prev_class out of range");

  // Teacher forcing: input at position t is the previous target.
  std::vector<int> input(target_classes.size());
  input[0] = prev_class;
  for (size_t t = 1; t < input.size(); ++t) input[t] = target_classes[t - 1];

  Val x = tape.gather_cols(tape.param(P.get("entry.w")), input);
  x = tape.add_cols(x, tape.param(P.get("entry.b")));
  Val cond = upsample(tape, local_features);

  Val skip_sum;
  for (size_t i = 0; i < cfg_.dilation_cycle.size(); ++i) {
    std::string b = "block" + std::to_string(i) + ".";
    int d = cfg_.dilation_cycle[i];
    auto gate_path = [&](const std::string& p) {
      Val pre = tape.conv1d(x, tape.param(P.get(p + "w")), d);
      pre = tape.add(pre, tape.conv1d(cond, tape.param(P.get(p + "loc")), 1));
      Val bias = tape.add(tape.matvec(tape.param(P.get(p + "glob")), embedding),
                          tape.param(P.get(p + "b")));
      return tape.add_cols(pre, bias);
    };
    Val z = tape.gated(gate_path(b + "filter."), gate_path(b + "gate."));
    Val res = tape.conv1d(z, tape.param(P.get(b + "res.w")), 1);
    res = tape.add_cols(res, tape.param(P.get(b + "res.b")));
    x = tape.add(x, res);
    Val sk = tape.conv1d(z, tape.param(P.get(b + "skip.w")), 1);
    sk = tape.add_cols(sk, tape.param(P.get(b + "skip.b")));
    skip_sum = skip_sum ? tape.add(skip_sum, sk) : sk;
  }

  Val h = tape.relu(skip_sum);
  h = tape.add_cols(tape.conv1d(h, tape.param(P.get("head1.w")), 1),
                    tape.param(P.get("head1.b")));
  h = tape.relu(h);
  Val logits = tape.add_cols(tape.conv1d(h, tape.param(P.get("head2.w")), 1),
                             tape.param(P.get("head2.b")));
  return logits;
}

Val WaveNet::nll(Tape& tape, const std::vector<int>& target_classes,
                 int prev_class, Val local_features, Val embedding,
                 int loss_start) const {
  int64_t T = static_cast<int64_t>(target_classes.size());
  check_arg(loss_start >= 0 && loss_start < T, "nll: loss_start out of range");
  Val logits = forward(tape, target_classes, prev_class, local_features, embedding);
  std::vector<int> targets(target_classes.begin() + loss_start,
                           target_classes.end());
  return tape.softmax_xent(logits, targets, loss_start);
}

double WaveNet::eval_nll(const Utterance& u, const SpeakerF0Stats& stats,
                         const std::vector<double>& embedding) const {
  QuantizedWaveform q = mulaw_encode(u.waveform, cfg_.quantization - 1,
                                     cfg_.quantization);
  LocalConditioning lc = make_local_conditioning(u, stats);
  Tape tape;
  Val e = tape.constant(Tensor::from({cfg_.embedding_dim},
                                     std::vector<double>(embedding)));
  // Constant embedding: mark no grads anywhere by using constants only.
  Val feats = tape.constant(lc.features);
  // Build against a const view; params wrapped as constants for speed.
  auto& P = const_cast<ParamSet&>(params_);
  std::vector<bool> saved;
  saved.reserve(P.size());
  for (size_t i = 0; i < P.size(); ++i) {
    saved.push_back(P.at(i).trainable);
    P.at(i).trainable = false;
  }
  double out;
  try {
    Val loss = nll(tape, q.classes, cfg_.quantization / 2, feats, e, 0);
    out = loss->val.v[0];
  } catch (...) {
    for (size_t i = 0; i < P.size(); ++i) P.at(i).trainable = saved[i];
    throw;
  }
  for (size_t i = 0; i < P.size(); ++i) P.at(i).trainable = saved[i];
  return out;
}

std::vector<double> WaveNet::embedding_row(int index) const {
  const Tensor& t = params_.get(kEmbeddingName).t;
  check_arg(index >= 0 && index < t.dim(0), "embedding_row: index out of range");
  int64_t D = t.dim(1);
  return std::vector<double>(t.v.begin() + index * D,
                             t.v.begin() + (index + 1) * D);
}

std::vector<double> WaveNet::embedding_table_mean() const {
  const Tensor& t = params_.get(kEmbeddingName).t;
  int64_t S = t.dim(0), D = t.dim(1);
  std::vector<double> mean(static_cast<size_t>(D), 0.0);
  for (int64_t s = 0; s < S; ++s)
    for (int64_t d = 0; d < D; ++d) mean[d] += t.v[s * D + d];
  for (auto& v : mean) v /= static_cast<double>(S);
  return mean;
}

}  // namespace sea
