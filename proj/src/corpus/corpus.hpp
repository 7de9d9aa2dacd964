// corpus/corpus.hpp
//
// Deterministic synthetic speech-like corpus.  Speakers are harmonic
// stacks with a pitch distribution and vibrato; utterances are phoneme
// code sequences rendered to waveforms with aligned frame-rate
// conditioning (phoneme codes, f0 track).  Everything is a pure function
// of seeds, so two machines build byte-identical corpora.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "audio/mulaw.hpp"

namespace sea {

class Rng;

constexpr int kPhonemeClasses = 16;
constexpr int kHarmonics = 8;

struct SyntheticSpeaker {
  int speaker_id = -1;
  std::vector<double> harmonic_amplitudes;  // H entries, >= 0, unit L1 norm
  double f0_mean = 0.0;      // Hz
  double f0_std = 0.0;       // Hz, per-frame spread
  double vibrato_rate = 0.0; // Hz
  double vibrato_depth = 0.0; // fraction of f0
};

// Fixed per-phoneme rendering recipe.  Code 0 is silence.
struct PhonemeTemplate {
  bool voiced = false;
  double amp = 0.0;        // envelope target
  double noise_mix = 0.0;  // noise amplitude relative to envelope
  double tilt = 1.0;       // spectral tilt exponent; >1 darkens
  double attack_s = 0.01;
  double release_s = 0.02;
};

const PhonemeTemplate& phoneme_template(int code);

struct Utterance {
  int speaker_id = -1;
  std::string id;
  Waveform waveform;
  std::vector<int> phoneme_codes;  // one per frame
  std::vector<double> f0_hz;       // one per frame, 0 on unvoiced frames
  int frame_stride = 64;

  int frames() const { return static_cast<int>(phoneme_codes.size()); }
  bool voiced(int frame) const { return f0_hz[frame] > 0.0; }
};

struct SpeakerF0Stats {
  int speaker_id = -1;
  double mean = 0.0;  // of log f0 over voiced frames
  double std = 1.0;   // population std, floored at 1e-3
};

struct CorpusSplit {
  std::vector<std::string> adaptation;  // full demonstration pool
  std::vector<std::string> test;
  std::vector<std::string> holdout;     // subset of adaptation
};

SyntheticSpeaker generate_speaker(uint64_t seed);

Utterance generate_utterance(const SyntheticSpeaker& speaker,
                             const std::vector<int>& phoneme_seq,
                             uint64_t seed, int frame_stride,
                             int sample_rate = 4000);

std::vector<int> random_phoneme_seq(int frames, Rng& rng);

SpeakerF0Stats compute_f0_stats(const std::vector<const Utterance*>& utts);
SpeakerF0Stats compute_f0_stats(const std::vector<Utterance>& utts);

// Voiced frames -> (log f0 - mean) / std, unvoiced -> 0.
std::vector<double> normalize_f0(const std::vector<double>& f0_hz,
                                 const SpeakerF0Stats& stats);

CorpusSplit split_corpus(const std::vector<std::string>& utterance_ids,
                         int test_count, double holdout_fraction,
                         uint64_t seed);

struct CorpusConfig {
  int sample_rate = 4000;
  int frame_stride = 64;
  int phoneme_classes = kPhonemeClasses;
  int train_speakers = 8;
  int heldout_speakers = 4;
  int utterances_per_train_speaker = 40;
  int utterances_per_heldout_speaker = 130;  // adaptation pool must cover the largest demo size
  int frames_per_utterance = 32;
  int test_count = 6;          // per held-out speaker
  double holdout_fraction = 0.10;
};

struct Corpus {
  CorpusConfig config;
  uint64_t seed = 0;
  std::vector<SyntheticSpeaker> speakers;        // train speakers first
  std::vector<int> train_speaker_ids;
  std::vector<int> heldout_speaker_ids;
  std::vector<Utterance> utterances;
  std::map<int, std::vector<int>> speaker_utterances;  // speaker -> indices
  std::map<int, SpeakerF0Stats> train_stats;           // train speakers only
  std::map<int, CorpusSplit> splits;                   // held-out speakers only

  const Utterance& by_id(const std::string& id) const;
  const SyntheticSpeaker& speaker(int speaker_id) const;
  bool is_train_speaker(int speaker_id) const;
  // Position of a train speaker in train_speaker_ids; the embedding-table
  // row used during multi-speaker training.
  int train_index(int speaker_id) const;
};

Corpus build_corpus(const CorpusConfig& cfg, uint64_t seed);

}  // namespace sea
