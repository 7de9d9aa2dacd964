// model/sampler.hpp
//
// Autoregressive inference.  Each dilated conv only ever reads its
// block's input at fixed offsets into the past, so the sampler keeps one
// small ring buffer of input columns per block and emits each sample in
// O(model) work instead of re-running the whole stack per step.  A
// teacher-forced mode replays a known sequence and returns every logits
// column, which the tests compare against the tape forward pass.

#pragma once

#include <cstdint>
#include <vector>

#include "model/wavenet.hpp"

namespace sea {

class Sampler {
 public:
  explicit Sampler(const WaveNet& model);

  // temperature > 0: x_t ~ softmax(logits/temperature); 0 means argmax
  // (ties break to the lowest class).  Output is mu-law decoded.
  Waveform sample(const LocalConditioning& lc,
                  const std::vector<double>& embedding, double temperature,
                  uint64_t seed, int sample_rate = 4000,
                  std::vector<int>* classes_out = nullptr) const;

  // Logits [Q, T] for a known input sequence (already-shifted semantics
  // identical to WaveNet::forward).
  Tensor teacher_forced_logits(const std::vector<int>& target_classes,
                               int prev_class, const LocalConditioning& lc,
                               const std::vector<double>& embedding) const;

 private:
  struct Tap {
    int offset;                  // samples into the past; 0 = current
    std::vector<double> w;       // [R, R]
  };
  struct Block {
    std::vector<Tap> filter_taps, gate_taps;
    std::vector<double> filter_loc, gate_loc;    // [R, C]
    std::vector<double> filter_glob, gate_glob;  // [R, D]
    std::vector<double> filter_b, gate_b;        // [R]
    std::vector<double> res_w, skip_w;           // [R,R], [Sk,R]
    std::vector<double> res_b, skip_b;
    int max_offset = 0;
  };

  void run(const std::vector<int>* forced, int prev_class,
           const LocalConditioning& lc, const std::vector<double>& embedding,
           double temperature, uint64_t seed, std::vector<int>* classes_out,
           Tensor* logits_out) const;

  WaveNetConfig cfg_;
  std::vector<double> entry_cols_;  // [Q, R]: entry column + bias per class
  std::vector<double> upsampler_;   // [C, C, 2*stride]
  std::vector<Block> blocks_;
  std::vector<double> head1_w_, head1_b_, head2_w_, head2_b_;
};

}  // namespace sea
