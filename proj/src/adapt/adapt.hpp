#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "corpus/corpus.hpp"
#include "model/wavenet.hpp"

#include <nlohmann/json.hpp>

namespace sea {

// Demonstration material for one target speaker: the utterances the
// adapters may optimize on, plus a held-out subset used only for early
// stopping.  f0 stats are pooled over everything the adapter can see.
struct DemoSet {
  int speaker_id = -1;
  std::vector<const Utterance*> demos;
  std::vector<const Utterance*> holdout;
  SpeakerF0Stats stats;
};

DemoSet make_demo_set(const Corpus& corpus, int speaker_id,
                      const std::vector<std::string>& demo_ids,
                      const std::vector<std::string>& holdout_ids);

struct AdaptSpec {
  // Embedding-only fit.
  int emb_steps = 2000;
  double emb_lr = 1e-2;
  int emb_eval_interval = 50;      // plateau checks on demo NLL
  int emb_plateau_patience = 4;    // consecutive non-improving checks to stop
  double emb_plateau_tol = 1e-3;   // improvement below this does not count
  int emb_plateau_max_utts = 8;    // cap on utterances per plateau check

  // Full fine-tune.
  int all_steps = 100;
  double all_lr = 1e-4;
  int patience = 5;                // stop after patience+1 consecutive non-improving evals
  int eval_interval = 10;

  // Shared crop geometry (mirrors the trainer).
  int crop_frames = 6;
  int context_frames = 1;
};

struct AdaptedVoice {
  std::string method;             // "emb" | "all" | "enc"
  std::vector<double> embedding;  // e
  bool has_finetuned = false;
  ParamSet finetuned;             // w', populated for method "all"
  SpeakerF0Stats stats;
  WaveNetConfig model_config;
  nlohmann::json provenance;      // method, steps_run, final NLLs, f0 stats
};

// Optimizes a fresh embedding against frozen model weights.  Initialization
// is the mean of the trained table rows plus N(0, 0.01) noise.  Stops at the
// step budget or when demo NLL plateaus.
AdaptedVoice sea_emb(const WaveNet& model, const DemoSet& demos,
                     const AdaptSpec& spec, uint64_t seed);

// Fine-tunes every parameter jointly with the embedding, starting from a
// completed sea_emb result; early-stops on holdout NLL and returns the
// snapshot with the minimum observed holdout NLL.
AdaptedVoice sea_all(const WaveNet& model, const DemoSet& demos,
                     const AdaptSpec& spec, uint64_t seed,
                     const AdaptedVoice& emb_init);

// Mean teacher-forced NLL of the voice over utterances (uses the fine-tuned
// weights when present, the base model otherwise).
double voice_nll(const WaveNet& base, const AdaptedVoice& voice,
                 const std::vector<const Utterance*>& utts);

void save_voice(const std::string& path, const AdaptedVoice& voice);
AdaptedVoice load_voice(const std::string& path);

}  // namespace sea
