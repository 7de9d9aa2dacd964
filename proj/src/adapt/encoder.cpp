#include "adapt/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "diff/adam.hpp"
#include "model/checkpoint.hpp"

namespace sea {

void EncoderConfig::validate() const {
  check_arg(embedding_dim > 0 && dvector_dim > 0 && mlp_hidden > 0 &&
                branch_channels > 0,
            "encoder config: bad dimensions");
  check_arg(!strides.empty() && strides.size() == kernels.size(),
            "encoder config: strides/kernels length mismatch");
  for (size_t i = 0; i < strides.size(); ++i) {
    check_arg(strides[i] >= 1 && kernels[i] >= strides[i],
              "encoder config: each kernel must cover its stride");
  }
}

int64_t EncoderConfig::pooled_span() const {
  int64_t s = 1;
  for (int v : strides) s *= v;
  return s;
}

int64_t EncoderConfig::min_input_samples() const {
  // Walk backward: layer i maps T -> (T - K)/s + 1, so one output frame at
  // the top needs K + (len-1)*s at each layer below.
  int64_t need = 1;
  for (size_t i = strides.size(); i-- > 0;) {
    need = kernels[i] + (need - 1) * strides[i];
  }
  return need;
}

nlohmann::json encoder_config_to_json(const EncoderConfig& cfg) {
  return nlohmann::json{
      {"embedding_dim", cfg.embedding_dim}, {"dvector_dim", cfg.dvector_dim},
      {"mlp_hidden", cfg.mlp_hidden},       {"branch_channels", cfg.branch_channels},
      {"strides", cfg.strides},             {"kernels", cfg.kernels},
  };
}

EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  EncoderConfig cfg;
  cfg.embedding_dim = j.value("embedding_dim", cfg.embedding_dim);
  cfg.dvector_dim = j.value("dvector_dim", cfg.dvector_dim);
  cfg.mlp_hidden = j.value("mlp_hidden", cfg.mlp_hidden);
  cfg.branch_channels = j.value("branch_channels", cfg.branch_channels);
  cfg.strides = j.value("strides", cfg.strides);
  cfg.kernels = j.value("kernels", cfg.kernels);
  cfg.validate();
  return cfg;
}

EncoderInput make_encoder_input(const Utterance& u, Verifier& verifier) {
  const int T = int(u.waveform.samples.size());
  EncoderInput in;
  in.signal = Tensor({2, T});
  for (int t = 0; t < T; ++t) in.signal.at2(0, t) = u.waveform.samples[t];
  for (int f = 0; f < u.frames(); ++f) {
    double v = u.voiced(f) ? 1.0 : 0.0;
    for (int k = 0; k < u.frame_stride; ++k) {
      int t = f * u.frame_stride + k;
      if (t < T) in.signal.at2(1, t) = v;
    }
  }
  in.dvector = verifier.dvector(u.waveform);
  return in;
}

namespace {

Tensor kaiming(Rng& rng, std::vector<int64_t> shape, int64_t fan_in) {
  Tensor t(std::move(shape));
  double s = std::sqrt(2.0 / double(fan_in));
  for (auto& x : t.v) x = rng.normal() * s;
  return t;
}

}  // namespace

SpeakerEncoder::SpeakerEncoder(const EncoderConfig& cfg, uint64_t init_seed)
    : cfg_(cfg) {
  cfg_.validate();
  Rng rng(hash_seed(init_seed, 0x656e63ULL));
  const int C = cfg_.branch_channels, D = cfg_.embedding_dim;
  params_.add("mlp.w1", kaiming(rng, {cfg_.mlp_hidden, cfg_.dvector_dim},
                                cfg_.dvector_dim));
  params_.add("mlp.b1", Tensor({cfg_.mlp_hidden}));
  params_.add("mlp.w2", kaiming(rng, {D, cfg_.mlp_hidden}, cfg_.mlp_hidden));
  params_.add("mlp.b2", Tensor({D}));
  for (size_t i = 0; i < cfg_.strides.size(); ++i) {
    int ci = i == 0 ? 2 : C;
    int k = cfg_.kernels[i];
    params_.add("conv" + std::to_string(i) + ".w",
                kaiming(rng, {C, ci, k}, int64_t(ci) * k));
    params_.add("conv" + std::to_string(i) + ".b", Tensor({C}));
  }
  params_.add("proj.w", kaiming(rng, {D, C}, C));
  params_.add("proj.b", Tensor({D}));
}

SpeakerEncoder::SpeakerEncoder(const EncoderConfig& cfg, ParamSet params)
    : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  check_arg(params_.has("mlp.w1") && params_.has("proj.w"),
            "encoder checkpoint missing parameters");
  check_arg(params_.get("mlp.w2").t.dim(0) == cfg_.embedding_dim,
            "encoder checkpoint embedding dim mismatch");
}

Val SpeakerEncoder::embed_graph(Tape& tape, const EncoderInput& in) {
  check_arg(in.signal.rank() == 2 && in.signal.dim(0) == 2,
            "encoder input must be [2, T]");
  check_arg(in.signal.dim(1) >= cfg_.min_input_samples(),
            "demo too short for the encoder conv stack");
  check_arg(int(in.dvector.size()) == cfg_.dvector_dim,
            "encoder input d-vector dim mismatch");

  // Branch A: frozen d-vector through the trainable MLP.
  Val d = tape.constant(Tensor::from({cfg_.dvector_dim}, in.dvector));
  Val h = tape.relu(tape.add(tape.matvec(tape.param(params_.get("mlp.w1")), d),
                             tape.param(params_.get("mlp.b1"))));
  Val a = tape.add(tape.matvec(tape.param(params_.get("mlp.w2")), h),
                   tape.param(params_.get("mlp.b2")));

  // Branch B: strided convs, mean pool, project.
  Val x = tape.constant(in.signal);
  for (size_t i = 0; i < cfg_.strides.size(); ++i) {
    std::string p = "conv" + std::to_string(i);
    x = tape.relu(tape.add_cols(
        tape.conv1d_strided(x, tape.param(params_.get(p + ".w")),
                            cfg_.strides[i]),
        tape.param(params_.get(p + ".b"))));
  }
  Val pooled = tape.mean_cols(x);
  Val b = tape.add(tape.matvec(tape.param(params_.get("proj.w")), pooled),
                   tape.param(params_.get("proj.b")));

  return tape.add(a, b);
}

std::vector<double> SpeakerEncoder::embed(const EncoderInput& in) {
  FreezeGuard freeze(params_);
  Tape tape;
  return embed_graph(tape, in)->val.v;
}

EncoderTrainResult train_encoder(const Corpus& corpus,
                                 const WaveNetConfig& model_cfg,
                                 const EncoderConfig& enc_cfg,
                                 const EncoderTrainSpec& spec,
                                 Verifier& verifier, uint64_t seed) {
  check_arg(corpus.train_speaker_ids.size() >= 2,
            "train_encoder: need at least 2 train speakers");
  check_arg(enc_cfg.embedding_dim == model_cfg.embedding_dim,
            "train_encoder: encoder and model embedding dims differ");
  check_arg(enc_cfg.dvector_dim == verifier.config().dvector_dim,
            "train_encoder: encoder d-vector dim differs from the verifier");
  check_arg(spec.steps > 0 && spec.crop_frames > 0, "train_encoder: bad spec");

  WaveNet model(model_cfg, hash_seed(seed, 0x656e636dULL));
  SpeakerEncoder encoder(enc_cfg, hash_seed(seed, 0x656e6365ULL));

  struct Item {
    int speaker_id;
    std::vector<int> classes;
    Tensor feats;
    EncoderInput enc_in;
  };
  std::vector<Item> items;
  std::map<int, std::vector<int>> by_speaker;  // speaker -> item indices
  for (int sid : corpus.train_speaker_ids) {
    const SpeakerF0Stats& stats = corpus.train_stats.at(sid);
    for (int idx : corpus.speaker_utterances.at(sid)) {
      const Utterance& u = corpus.utterances[idx];
      Item it;
      it.speaker_id = sid;
      it.classes = mulaw_encode(u.waveform, model_cfg.quantization - 1,
                                model_cfg.quantization).classes;
      it.feats = make_local_conditioning(u, stats).features;
      it.enc_in = make_encoder_input(u, verifier);
      by_speaker[sid].push_back(int(items.size()));
      items.push_back(std::move(it));
    }
  }

  AdamConfig ac;
  ac.lr = spec.lr;
  Adam opt(std::vector<ParamSet*>{&model.params(), &encoder.params()}, ac);

  TrainTrace trace;
  const int stride = model_cfg.frame_stride;
  for (int step = 0; step < spec.steps; ++step) {
    Rng rng(hash_seed(seed, 0x656e6373ULL, uint64_t(step)));
    const Item& tgt = items[rng.uniform_int(int64_t(items.size()))];
    const auto& pool = by_speaker.at(tgt.speaker_id);
    const Item* demo;
    do {
      demo = &items[pool[rng.uniform_int(int64_t(pool.size()))]];
    } while (demo == &tgt && pool.size() > 1);

    int frames = int(tgt.feats.shape[1]);
    int crop = std::min(spec.crop_frames, frames);
    int start_f = int(rng.uniform_int(frames - crop + 1));
    int ctx = std::min(spec.context_frames, start_f);
    int f0 = start_f - ctx, f1 = start_f + crop;
    std::vector<int> classes(tgt.classes.begin() + f0 * stride,
                             tgt.classes.begin() + f1 * stride);
    int prev = f0 > 0 ? tgt.classes[f0 * stride - 1] : model_cfg.quantization / 2;
    Tensor feats = slice_cols(tgt.feats, f0, f1);

    Tape tape;
    Val e = encoder.embed_graph(tape, demo->enc_in);
    Val loss = model.nll(tape, classes, prev, tape.constant(std::move(feats)),
                         e, ctx * stride);
    double nll = loss->val.v[0];
    if (!std::isfinite(nll))
      throw NumericError("encoder training diverged at step " +
                         std::to_string(step));
    model.params().zero_grads();
    encoder.params().zero_grads();
    tape.backward(loss);
    opt.step();
    trace.nll.push_back(nll);
    if (spec.log_interval > 0 && (step + 1) % spec.log_interval == 0)
      std::printf("encoder step %d  nll %.4f\n", step + 1, nll);
  }

  return {std::move(model), std::move(encoder), std::move(trace)};
}

AdaptedVoice sea_enc_predict(SpeakerEncoder& encoder, Verifier& verifier,
                             const WaveNet& model, const DemoSet& demos) {
  check_arg(!demos.demos.empty(), "sea_enc_predict: empty demo set");
  const int D = encoder.config().embedding_dim;
  std::vector<double> e(D, 0.0);
  for (const Utterance* u : demos.demos) {
    std::vector<double> ei = encoder.embed(make_encoder_input(*u, verifier));
    for (int i = 0; i < D; ++i) e[i] += ei[i];
  }
  for (double& x : e) x /= double(demos.demos.size());

  AdaptedVoice out;
  out.method = "enc";
  out.embedding = e;
  out.stats = demos.stats;
  out.model_config = model.config();
  double demo_nll = 0.0;
  for (const Utterance* u : demos.demos)
    demo_nll += model.eval_nll(*u, demos.stats, e);
  demo_nll /= double(demos.demos.size());
  double holdout_nll = std::numeric_limits<double>::quiet_NaN();
  if (!demos.holdout.empty()) {
    holdout_nll = 0.0;
    for (const Utterance* u : demos.holdout)
      holdout_nll += model.eval_nll(*u, demos.stats, e);
    holdout_nll /= double(demos.holdout.size());
  }
  out.provenance = nlohmann::json{
      {"method", "enc"},
      {"steps_run", 0},
      {"final_demo_nll", demo_nll},
      {"f0_log_mean", demos.stats.mean},
      {"f0_log_std", demos.stats.std},
  };
  if (std::isfinite(holdout_nll)) {
    out.provenance["final_holdout_nll"] = holdout_nll;
  } else {
    out.provenance["final_holdout_nll"] = nullptr;
  }
  return out;
}

void save_encoder_checkpoint(const std::string& path, const WaveNet& model,
                             const SpeakerEncoder& encoder) {
  nlohmann::json meta{
      {"kind", "encoder"},
      {"model_config", wavenet_config_to_json(model.config())},
      {"encoder_config", encoder_config_to_json(encoder.config())},
  };
  save_checkpoint(path, meta,
                  {{"model.", &model.params()}, {"encoder.", &encoder.params()}});
}

EncoderTrainResult load_encoder_checkpoint(const std::string& path) {
  Checkpoint ckpt = load_checkpoint(path);
  check_io(ckpt.meta.value("kind", "") == "encoder",
           path + " is not an encoder checkpoint");
  WaveNetConfig mc = wavenet_config_from_json(ckpt.meta.at("model_config"));
  EncoderConfig ec = encoder_config_from_json(ckpt.meta.at("encoder_config"));
  WaveNet model(mc, extract_prefixed(ckpt, "model."));
  SpeakerEncoder encoder(ec, extract_prefixed(ckpt, "encoder."));
  return {std::move(model), std::move(encoder), {}};
}

}  // namespace sea
