#include "eval/verifier.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "diff/adam.hpp"

namespace sea {

void VerifierConfig::validate() const {
  check_arg(channels > 0 && dvector_dim > 0 && num_speakers >= 2,
            "verifier config: bad dimensions");
  check_arg(kernel_width >= 1, "verifier config: bad kernel width");
}

nlohmann::json verifier_config_to_json(const VerifierConfig& cfg) {
  return nlohmann::json{
      {"window", cfg.spectral.window},
      {"hop", cfg.spectral.hop},
      {"bands", cfg.spectral.bands},
      {"freq_lo", cfg.spectral.freq_lo},
      {"freq_hi", cfg.spectral.freq_hi},
      {"channels", cfg.channels},
      {"kernel_width", cfg.kernel_width},
      {"dvector_dim", cfg.dvector_dim},
      {"num_speakers", cfg.num_speakers},
  };
}

VerifierConfig verifier_config_from_json(const nlohmann::json& j) {
  VerifierConfig cfg;
  cfg.spectral.window = j.value("window", cfg.spectral.window);
  cfg.spectral.hop = j.value("hop", cfg.spectral.hop);
  cfg.spectral.bands = j.value("bands", cfg.spectral.bands);
  cfg.spectral.freq_lo = j.value("freq_lo", cfg.spectral.freq_lo);
  cfg.spectral.freq_hi = j.value("freq_hi", cfg.spectral.freq_hi);
  cfg.channels = j.value("channels", cfg.channels);
  cfg.kernel_width = j.value("kernel_width", cfg.kernel_width);
  cfg.dvector_dim = j.value("dvector_dim", cfg.dvector_dim);
  cfg.num_speakers = j.value("num_speakers", cfg.num_speakers);
  cfg.validate();
  return cfg;
}

namespace {

Tensor kaiming(Rng& rng, std::vector<int64_t> shape, int64_t fan_in) {
  Tensor t(std::move(shape));
  double s = std::sqrt(2.0 / double(fan_in));
  for (auto& x : t.v) x = rng.normal() * s;
  return t;
}

}  // namespace

Verifier::Verifier(const VerifierConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(hash_seed(init_seed, 0x76657269ULL));
  const int C = cfg_.channels, B = cfg_.spectral.bands, K = cfg_.kernel_width;
  const int Dv = cfg_.dvector_dim, S = cfg_.num_speakers;
  params_.add("conv1.w", kaiming(rng, {C, B, K}, int64_t(B) * K));
  params_.add("conv1.b", Tensor({C}));
  params_.add("conv2.w", kaiming(rng, {C, C, K}, int64_t(C) * K));
  params_.add("conv2.b", Tensor({C}));
  params_.add("dvec.w", kaiming(rng, {Dv, C}, C));
  params_.add("dvec.b", Tensor({Dv}));
  params_.add("head.w", kaiming(rng, {S, Dv}, Dv));
  params_.add("head.b", Tensor({S}));
}

Verifier::Verifier(const VerifierConfig& cfg, ParamSet params)
    : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  const char* names[] = {"conv1.w", "conv1.b", "conv2.w", "conv2.b",
                         "dvec.w",  "dvec.b",  "head.w",  "head.b"};
  for (const char* n : names) {
    check_arg(params_.has(n), std::string("verifier checkpoint missing ") + n);
  }
  check_arg(params_.get("conv1.w").t.dim(1) == cfg_.spectral.bands,
            "verifier checkpoint band count mismatch");
  check_arg(params_.get("head.w").t.dim(0) == cfg_.num_speakers,
            "verifier checkpoint speaker count mismatch");
}

Val Verifier::dvector_graph(Tape& tape, const Tensor& feats) {
  check_arg(feats.rank() == 2 && feats.dim(0) == cfg_.spectral.bands,
            "verifier: features must be [bands, frames]");
  Val x = tape.constant(feats);
  Val h1 = tape.relu(tape.add_cols(
      tape.conv1d(x, tape.param(params_.get("conv1.w")), 1),
      tape.param(params_.get("conv1.b"))));
  Val h2 = tape.relu(tape.add_cols(
      tape.conv1d(h1, tape.param(params_.get("conv2.w")), 2),
      tape.param(params_.get("conv2.b"))));
  Val pooled = tape.mean_cols(h2);
  return tape.add(tape.matvec(tape.param(params_.get("dvec.w")), pooled),
                  tape.param(params_.get("dvec.b")));
}

Val Verifier::class_loss(Tape& tape, const Tensor& feats, int speaker_index) {
  check_arg(speaker_index >= 0 && speaker_index < cfg_.num_speakers,
            "verifier: speaker index out of range");
  Val d = dvector_graph(tape, feats);
  Val logits = tape.add(tape.matvec(tape.param(params_.get("head.w")), d),
                        tape.param(params_.get("head.b")));
  return tape.softmax_xent(tape.as_column(logits), {speaker_index});
}

std::vector<double> Verifier::dvector_raw(const Tensor& feats) {
  FreezeGuard freeze(params_);
  Tape tape;
  Val d = dvector_graph(tape, feats);
  return d->val.v;
}

std::vector<double> Verifier::dvector(const Waveform& wave) {
  std::vector<double> d = dvector_raw(spectral_frames(wave, cfg_.spectral));
  double ss = 0.0;
  for (double x : d) ss += x * x;
  check_numeric(ss > 1e-24, "verifier produced a near-zero d-vector");
  double inv = 1.0 / std::sqrt(ss);
  for (double& x : d) x *= inv;
  return d;
}

int Verifier::classify(const Tensor& feats) {
  std::vector<double> d = dvector_raw(feats);
  const Tensor& w = params_.get("head.w").t;
  const Tensor& b = params_.get("head.b").t;
  int best = 0;
  double best_v = -1e300;
  for (int s = 0; s < cfg_.num_speakers; ++s) {
    double acc = b.v[s];
    for (int i = 0; i < cfg_.dvector_dim; ++i) acc += w.at2(s, i) * d[i];
    if (acc > best_v) {
      best_v = acc;
      best = s;
    }
  }
  return best;
}

namespace {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::sqrt(std::max(na * nb, 1e-300));
}

}  // namespace

namespace {

struct LabeledFeats {
  int class_index;
  Tensor feats;
};

// Deterministic train/holdout partition of the training speakers'
// utterances: every holdout_every-th utterance per speaker is held out.
void partition(const Corpus& corpus, const SpectralConfig& spectral,
               int holdout_every, std::vector<LabeledFeats>* train,
               std::vector<LabeledFeats>* holdout) {
  for (size_t ci = 0; ci < corpus.train_speaker_ids.size(); ++ci) {
    int sid = corpus.train_speaker_ids[ci];
    const auto& idxs = corpus.speaker_utterances.at(sid);
    for (size_t k = 0; k < idxs.size(); ++k) {
      LabeledFeats it{int(ci),
                      spectral_frames(corpus.utterances[idxs[k]].waveform,
                                      spectral)};
      std::vector<LabeledFeats>* dst =
          (k % size_t(holdout_every) == 0) ? holdout : train;
      if (dst) dst->push_back(std::move(it));
    }
  }
}

}  // namespace

VerifierQuality verifier_quality(Verifier& v, const Corpus& corpus,
                                 int holdout_every) {
  check_arg(holdout_every >= 2, "verifier quality: holdout_every < 2");
  std::vector<LabeledFeats> holdout;
  partition(corpus, v.config().spectral, holdout_every, nullptr, &holdout);
  check_arg(!holdout.empty(), "verifier quality: empty holdout");

  VerifierQuality q;
  int correct = 0;
  std::vector<std::vector<double>> dvecs(holdout.size());
  for (size_t i = 0; i < holdout.size(); ++i) {
    if (v.classify(holdout[i].feats) == holdout[i].class_index) ++correct;
    dvecs[i] = v.dvector_raw(holdout[i].feats);
  }
  q.accuracy = double(correct) / double(holdout.size());
  double same_sum = 0.0, cross_sum = 0.0;
  int64_t same_n = 0, cross_n = 0;
  for (size_t i = 0; i < holdout.size(); ++i) {
    for (size_t j = i + 1; j < holdout.size(); ++j) {
      double c = cosine(dvecs[i], dvecs[j]);
      if (holdout[i].class_index == holdout[j].class_index) {
        same_sum += c;
        ++same_n;
      } else {
        cross_sum += c;
        ++cross_n;
      }
    }
  }
  check_arg(same_n > 0 && cross_n > 0,
            "verifier quality: holdout lacks same/cross pairs");
  q.same_cosine_mean = same_sum / same_n;
  q.cross_cosine_mean = cross_sum / cross_n;
  return q;
}

VerifierReport train_verifier(Verifier& v, const Corpus& corpus,
                              const VerifierTrainSpec& spec, uint64_t seed) {
  check_arg(int(corpus.train_speaker_ids.size()) == v.config().num_speakers,
            "verifier class count must match training speaker count");
  check_arg(spec.steps > 0 && spec.batch > 0, "verifier train spec: bad budget");
  check_arg(spec.holdout_every >= 2, "verifier train spec: holdout_every < 2");

  std::vector<LabeledFeats> train, holdout;
  partition(corpus, v.config().spectral, spec.holdout_every, &train, &holdout);
  check_arg(train.size() >= 2 && !holdout.empty(),
            "verifier training needs utterances on both sides of the holdout");

  AdamConfig ac;
  ac.lr = spec.lr;
  Adam opt(v.params(), ac);
  VerifierReport report;

  for (int step = 0; step < spec.steps; ++step) {
    Rng rng(hash_seed(seed, 0x76737465ULL, uint64_t(step)));
    v.params().zero_grads();
    Tape tape;
    Val total;
    for (int b = 0; b < spec.batch; ++b) {
      const LabeledFeats& it = train[rng.uniform_int(int64_t(train.size()))];
      Val l = v.class_loss(tape, it.feats, it.class_index);
      total = b == 0 ? l : tape.add(total, l);
    }
    Val loss = tape.scale(total, 1.0 / spec.batch);
    tape.backward(loss);
    opt.step();
    if ((step + 1) % spec.log_interval == 0 || step + 1 == spec.steps) {
      report.nll.push_back(loss->val.v[0]);
    }
  }

  report.quality = verifier_quality(v, corpus, spec.holdout_every);
  return report;
}

}  // namespace sea
