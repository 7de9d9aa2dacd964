// model/trainer.cpp

#include "model/trainer.hpp"

#include <cmath>
#include <cstdio>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace sea {

Tensor slice_cols(const Tensor& t, int64_t c0, int64_t c1) {
  check_arg(t.rank() == 2, "slice_cols: need a 2-D tensor");
  int64_t C = t.shape[0], T = t.shape[1];
  check_arg(c0 >= 0 && c0 < c1 && c1 <= T, "slice_cols: bad column range");
  Tensor out({C, c1 - c0});
  for (int64_t c = 0; c < C; ++c)
    for (int64_t j = c0; j < c1; ++j) out.at2(c, j - c0) = t.v[c * T + j];
  return out;
}

TrainTrace train_multispeaker(WaveNet& model, Adam& opt, const Corpus& corpus,
                              const TrainSpec& spec, uint64_t seed,
                              int start_step) {
  check_arg(corpus.train_speaker_ids.size() >= 2,
            "train_multispeaker: need at least 2 train speakers");
  check_arg(spec.steps > 0 && spec.crop_frames > 0 && spec.context_frames >= 0,
            "train_multispeaker: bad spec");
  const WaveNetConfig& cfg = model.config();
  check_arg(cfg.num_speakers ==
                static_cast<int>(corpus.train_speaker_ids.size()),
            "train_multispeaker: embedding table size != train speaker count");
  check_arg(cfg.frame_stride == corpus.config.frame_stride,
            "train_multispeaker: frame stride mismatch");

  // Cache the quantized classes and conditioning features once.
  struct Item {
    int train_index;
    std::vector<int> classes;
    Tensor feats;
  };
  std::vector<Item> items;
  for (int sid : corpus.train_speaker_ids) {
    const SpeakerF0Stats& stats = corpus.train_stats.at(sid);
    for (int idx : corpus.speaker_utterances.at(sid)) {
      const Utterance& u = corpus.utterances[idx];
      Item item;
      item.train_index = corpus.train_index(sid);
      item.classes = mulaw_encode(u.waveform, cfg.quantization - 1,
                                  cfg.quantization).classes;
      item.feats = make_local_conditioning(u, stats).features;
      items.push_back(std::move(item));
    }
  }
  check_arg(!items.empty(), "train_multispeaker: no train utterances");

  TrainTrace trace;
  int stride = cfg.frame_stride;
  for (int s = 0; s < spec.steps; ++s) {
    int step = start_step + s;
    Rng rng(hash_seed(seed, 0x7261696e, static_cast<uint64_t>(step)));
    const Item& item = items[rng.uniform_int(static_cast<int64_t>(items.size()))];
    int frames = static_cast<int>(item.feats.shape[1]);
    int crop = std::min(spec.crop_frames, frames);
    int start_f = static_cast<int>(rng.uniform_int(frames - crop + 1));
    int ctx = std::min(spec.context_frames, start_f);
    int f0 = start_f - ctx, f1 = start_f + crop;

    std::vector<int> classes(item.classes.begin() + f0 * stride,
                             item.classes.begin() + f1 * stride);
    int prev = f0 > 0 ? item.classes[f0 * stride - 1] : cfg.quantization / 2;
    Tensor feats = slice_cols(item.feats, f0, f1);

    Tape tape;
    Val e = tape.embed_row(
        tape.param(model.params().get(WaveNet::kEmbeddingName)),
        item.train_index);
    Val loss = model.nll(tape, classes, prev, tape.constant(std::move(feats)),
                         e, ctx * stride);
    double nll = loss->val.v[0];
    if (!std::isfinite(nll))
      throw NumericError("training diverged at step " + std::to_string(step));
    model.params().zero_grads();
    tape.backward(loss);
    opt.step();
    trace.nll.push_back(nll);
    if (spec.log_interval > 0 && (step + 1) % spec.log_interval == 0)
      std::printf("step %d  nll %.4f\n", step + 1, nll);
  }
  return trace;
}

}  // namespace sea
