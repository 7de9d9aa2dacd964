#pragma once

#include <cstdint>
#include <vector>

#include "corpus/corpus.hpp"
#include "diff/tape.hpp"
#include "eval/features.hpp"

#include <nlohmann/json.hpp>

namespace sea {

// Speaker-verification network.  A small convolutional classifier over
// spectral frames; the penultimate linear layer is the d-vector layer.
// Trained by speaker classification on real training-speaker utterances,
// then used purely as a d-vector extractor (L2-normalized penultimate
// activation) for enrollment/trial scoring.
struct VerifierConfig {
  SpectralConfig spectral;
  int channels = 32;
  int kernel_width = 3;
  int dvector_dim = 32;
  int num_speakers = 8;  // classification classes = training speakers

  void validate() const;
};

nlohmann::json verifier_config_to_json(const VerifierConfig& cfg);
VerifierConfig verifier_config_from_json(const nlohmann::json& j);

class Verifier {
 public:
  Verifier(const VerifierConfig& cfg, uint64_t init_seed);
  Verifier(const VerifierConfig& cfg, ParamSet params);  // checkpoint restore

  const VerifierConfig& config() const { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  // Training-path graph builders (parameters recorded on the tape).
  Val dvector_graph(Tape& tape, const Tensor& feats);      // [Dv], unnormalized
  Val class_loss(Tape& tape, const Tensor& feats, int speaker_index);

  // Inference (no gradient work recorded).
  std::vector<double> dvector_raw(const Tensor& feats);    // unnormalized
  std::vector<double> dvector(const Waveform& wave);       // L2-normalized
  int classify(const Tensor& feats);                       // argmax class

 private:
  VerifierConfig cfg_;
  ParamSet params_;
};

struct VerifierTrainSpec {
  int steps = 1500;
  double lr = 1e-3;
  int batch = 4;
  int log_interval = 200;
  int holdout_every = 5;  // utterance indices i with i % k == 0 held out
};

struct VerifierQuality {
  double accuracy = 0.0;
  double same_cosine_mean = 0.0;
  double cross_cosine_mean = 0.0;
  double margin() const { return same_cosine_mean - cross_cosine_mean; }
};

// Classification accuracy and the same-vs-cross speaker cosine margin on
// the deterministic held-out utterance subset (every holdout_every-th).
VerifierQuality verifier_quality(Verifier& v, const Corpus& corpus,
                                 int holdout_every);

struct VerifierReport {
  VerifierQuality quality;
  std::vector<double> nll;  // one entry per log interval
};

// Trains on the corpus's training speakers (classification), holding out a
// deterministic utterance subset to measure accuracy and the same-vs-cross
// speaker cosine margin on d-vectors.
VerifierReport train_verifier(Verifier& v, const Corpus& corpus,
                              const VerifierTrainSpec& spec, uint64_t seed);

}  // namespace sea
