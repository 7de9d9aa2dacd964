#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adapt/adapt.hpp"
#include "corpus/corpus.hpp"
#include "eval/verifier.hpp"
#include "model/trainer.hpp"
#include "model/wavenet.hpp"

namespace sea {

// Demonstration encoder: predicts a speaker embedding directly from demo
// audio.  Two branches summed into the embedding space:
//   A: the frozen verifier's d-vector put through a small trainable MLP;
//   B: strided 1-D convs over [waveform; voicing] downsampling far below
//      frame rate, mean-pooled over time (length-invariant), projected.
struct EncoderConfig {
  int embedding_dim = 16;  // must equal the WaveNet embedding dim
  int dvector_dim = 32;    // verifier d-vector size
  int mlp_hidden = 32;
  int branch_channels = 16;
  std::vector<int> strides = {4, 4, 4, 4, 2, 2};
  std::vector<int> kernels = {8, 8, 8, 8, 2, 2};

  void validate() const;
  // Samples per pooled frame (product of strides).
  int64_t pooled_span() const;
  // Shortest waveform that still yields one pooled frame.
  int64_t min_input_samples() const;
};

nlohmann::json encoder_config_to_json(const EncoderConfig& cfg);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);

// Per-demo encoder input, precomputable: branch B's [2, T] signal matrix
// and branch A's frozen d-vector.
struct EncoderInput {
  Tensor signal;                // [2, T]: waveform row, voicing row
  std::vector<double> dvector;  // L2-normalized, from the frozen verifier
};

EncoderInput make_encoder_input(const Utterance& u, Verifier& verifier);

class SpeakerEncoder {
 public:
  SpeakerEncoder(const EncoderConfig& cfg, uint64_t init_seed);
  SpeakerEncoder(const EncoderConfig& cfg, ParamSet params);

  const EncoderConfig& config() const { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  // Embedding prediction as a tape graph (training path).
  Val embed_graph(Tape& tape, const EncoderInput& in);
  // Frozen inference.
  std::vector<double> embed(const EncoderInput& in);

 private:
  EncoderConfig cfg_;
  ParamSet params_;
};

struct EncoderTrainSpec {
  int steps = 1200;
  double lr = 2e-3;
  int crop_frames = 6;
  int context_frames = 1;
  int log_interval = 200;
};

struct EncoderTrainResult {
  WaveNet model;
  SpeakerEncoder encoder;
  TrainTrace trace;
};

// Joint from-scratch training: per step one random training utterance is
// the teacher-forced target and one random other utterance of the same
// speaker feeds the encoder, whose output replaces the table lookup.
EncoderTrainResult train_encoder(const Corpus& corpus,
                                 const WaveNetConfig& model_cfg,
                                 const EncoderConfig& enc_cfg,
                                 const EncoderTrainSpec& spec,
                                 Verifier& verifier, uint64_t seed);

// e = mean of encoder outputs over the demos; no optimizer steps.  The
// model passed in must be the one the encoder was trained with.
AdaptedVoice sea_enc_predict(SpeakerEncoder& encoder, Verifier& verifier,
                             const WaveNet& model, const DemoSet& demos);

void save_encoder_checkpoint(const std::string& path, const WaveNet& model,
                             const SpeakerEncoder& encoder);
EncoderTrainResult load_encoder_checkpoint(const std::string& path);

}  // namespace sea
