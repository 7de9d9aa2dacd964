// model/trainer.hpp
//
// Multi-speaker training: random crops with one frame of warm-up context,
// teacher forcing, Adam.  Per-step randomness is derived from
// hash(seed, absolute step), so a run resumed from a checkpoint at step k
// replays steps k+1.. with the same crops as an uninterrupted run.

#pragma once

#include <cstdint>
#include <vector>

#include "corpus/corpus.hpp"
#include "diff/adam.hpp"
#include "model/wavenet.hpp"

namespace sea {

struct TrainSpec {
  int steps = 800;
  double lr = 2e-3;
  int crop_frames = 6;     // scored region, in frames
  int context_frames = 1;  // unscored warm-up preceding the crop
  int log_interval = 100;  // 0 silences progress lines
};

struct TrainTrace {
  std::vector<double> nll;  // one entry per executed step
};

Tensor slice_cols(const Tensor& t, int64_t c0, int64_t c1);

TrainTrace train_multispeaker(WaveNet& model, Adam& opt, const Corpus& corpus,
                              const TrainSpec& spec, uint64_t seed,
                              int start_step = 0);

}  // namespace sea
