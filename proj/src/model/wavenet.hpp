// model/wavenet.hpp
//
// Conditional autoregressive WaveNet.  Gated residual blocks with dilated
// causal convs; local conditioning (phoneme one-hot + normalized f0 +
// voicing at frame rate) is upsampled to sample rate by a single
// bias-free transposed conv; a speaker embedding enters every block's
// filter and gate paths as a per-channel bias.  The predicted sample is
// fed back one-hot through a 1x1 entry conv (teacher forcing shifts the
// input right by one, so logits[:, t] never see x_t).
//
// The output head's final conv starts at zero, so an untrained model is
// exactly uniform and its NLL is exactly ln Q.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "audio/mulaw.hpp"
#include "corpus/corpus.hpp"
#include "diff/tape.hpp"

namespace sea {

struct WaveNetConfig {
  int quantization = 256;
  int residual_channels = 32;
  int skip_channels = 64;
  std::vector<int> dilation_cycle = {1, 2, 4, 8, 16, 1, 2, 4, 8, 16};
  int kernel_width = 2;
  int embedding_dim = 16;
  int frame_stride = 64;
  int num_speakers = 8;

  int receptive_field() const;
  int cond_channels() const { return kPhonemeClasses + 2; }
  void validate() const;
};

// Frame-rate local conditioning + the speaker embedding id (resolved by
// the caller to a tape value, since adaptation swaps the source).
struct LocalConditioning {
  Tensor features;  // [P+2, F]: one-hot phonemes, f0 normalized, voicing
  int frame_stride = 64;
  int frames() const { return static_cast<int>(features.shape[1]); }
};

LocalConditioning make_local_conditioning(const Utterance& u,
                                          const SpeakerF0Stats& stats);

class WaveNet {
 public:
  WaveNet(WaveNetConfig cfg, uint64_t init_seed);
  // Takes ownership of externally loaded parameters (e.g. a checkpoint).
  WaveNet(WaveNetConfig cfg, ParamSet params);

  const WaveNetConfig& config() const { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  int64_t param_count() const { return params_.total_values(); }

  // Upsampled local conditioning, [cond_channels, frames*stride].
  Val upsample(Tape& tape, Val local_features) const;

  // Teacher-forced logits [Q, T].  input_classes[t] is fed at position t,
  // i.e. the caller passes the ALREADY-SHIFTED sequence: position 0 gets
  // prev_class (Q/2 at utterance start, else the true previous sample).
  Val forward(Tape& tape, const std::vector<int>& target_classes,
              int prev_class, Val local_features, Val embedding) const;

  // Mean NLL over columns [loss_start, T).  loss_start lets croppped
  // training feed warm-up context without scoring it.
  Val nll(Tape& tape, const std::vector<int>& target_classes, int prev_class,
          Val local_features, Val embedding, int loss_start = 0) const;

  // Convenience: full-utterance teacher-forced NLL with a fixed embedding
  // vector, no gradients.
  double eval_nll(const Utterance& u, const SpeakerF0Stats& stats,
                  const std::vector<double>& embedding) const;

  // Embedding helpers.
  std::vector<double> embedding_row(int index) const;
  std::vector<double> embedding_table_mean() const;

  static const char* kEmbeddingName;  // "embedding"

 private:
  void build_params(uint64_t seed);
  WaveNetConfig cfg_;
  ParamSet params_;
};

}  // namespace sea
