// corpus/corpus.cpp

#include "corpus/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace sea {

namespace {

double frac(double z) { return z - std::floor(z); }

std::vector<PhonemeTemplate> make_templates() {
  std::vector<PhonemeTemplate> t(kPhonemeClasses);
  // Code 0: silence.
  t[0] = PhonemeTemplate{false, 0.0, 0.0, 1.0, 0.005, 0.020};
  // Codes 1..11: voiced, vowel-like; spread the knobs with irrational
  // multipliers so no two templates coincide.
  for (int c = 1; c <= 11; ++c) {
    PhonemeTemplate& p = t[c];
    p.voiced = true;
    p.amp = 0.55 + 0.35 * frac(c * 0.37);
    p.noise_mix = 0.02 + 0.08 * frac(c * 0.61);
    p.tilt = 0.6 + 0.8 * frac(c * 0.83);
    p.attack_s = 0.008 + 0.010 * frac(c * 0.29);
    p.release_s = 0.015 + 0.025 * frac(c * 0.47);
  }
  // Codes 12..15: unvoiced, noise only.
  for (int c = 12; c <= 15; ++c) {
    PhonemeTemplate& p = t[c];
    p.voiced = false;
    p.amp = 0.25 + 0.20 * frac(c * 0.37);
    p.noise_mix = 1.0;
    p.tilt = 1.0;
    p.attack_s = 0.004;
    p.release_s = 0.008;
  }
  return t;
}

}  // namespace

const PhonemeTemplate& phoneme_template(int code) {
  static const std::vector<PhonemeTemplate> table = make_templates();
  check_arg(code >= 0 && code < kPhonemeClasses,
            "phoneme code out of range: " + std::to_string(code));
  return table[static_cast<size_t>(code)];
}

SyntheticSpeaker generate_speaker(uint64_t seed) {
  Rng rng(seed);
  SyntheticSpeaker s;
  s.f0_mean = rng.uniform(90.0, 300.0);
  s.f0_std = rng.uniform(1.0, 8.0);
  s.vibrato_rate = rng.uniform(3.0, 7.0);
  s.vibrato_depth = rng.uniform(0.005, 0.030);
  double base = rng.uniform(0.50, 0.80);
  s.harmonic_amplitudes.resize(kHarmonics);
  double sum = 0.0;
  for (int h = 0; h < kHarmonics; ++h) {
    double a = std::pow(base, h) * std::exp(0.25 * rng.normal());
    s.harmonic_amplitudes[h] = a;
    sum += a;
  }
  for (double& a : s.harmonic_amplitudes) a /= sum;
  return s;
}

Utterance generate_utterance(const SyntheticSpeaker& speaker,
                             const std::vector<int>& phoneme_seq,
                             uint64_t seed, int frame_stride,
                             int sample_rate) {
  check_arg(!phoneme_seq.empty(), "generate_utterance: empty phoneme sequence");
  check_arg(frame_stride > 0 && sample_rate > 0,
            "generate_utterance: bad stride or rate");
  for (int c : phoneme_seq) phoneme_template(c);  // validates range

  int frames = static_cast<int>(phoneme_seq.size());
  int T = frames * frame_stride;
  Utterance u;
  u.speaker_id = speaker.speaker_id;
  u.phoneme_codes = phoneme_seq;
  u.frame_stride = frame_stride;
  u.waveform.sample_rate = sample_rate;
  u.waveform.samples.assign(static_cast<size_t>(T), 0.0);
  u.f0_hz.assign(static_cast<size_t>(frames), 0.0);

  Rng rng(seed);
  double vib_phase = rng.uniform(0.0, 2.0 * M_PI);

  // Frame-rate f0 track: mean + per-frame spread, multiplied by vibrato.
  for (int f = 0; f < frames; ++f) {
    if (!phoneme_template(phoneme_seq[f]).voiced) continue;
    double t = static_cast<double>(f) * frame_stride / sample_rate;
    double vib = 1.0 + speaker.vibrato_depth *
                           std::sin(2.0 * M_PI * speaker.vibrato_rate * t + vib_phase);
    double f0 = (speaker.f0_mean + rng.normal(0.0, speaker.f0_std)) * vib;
    u.f0_hz[f] = std::max(40.0, f0);
  }

  int H = static_cast<int>(speaker.harmonic_amplitudes.size());
  std::vector<double> phase(static_cast<size_t>(H), 0.0);
  std::vector<double> eff(static_cast<size_t>(H), 0.0);
  double env = 0.0;
  double nyq_limit = 0.45 * sample_rate;
  double* x = u.waveform.samples.data();

  for (int f = 0; f < frames; ++f) {
    const PhonemeTemplate& tpl = phoneme_template(phoneme_seq[f]);
    double f0 = u.f0_hz[f];
    for (int h = 0; h < H; ++h)
      eff[h] = speaker.harmonic_amplitudes[h] * std::pow(h + 1.0, 1.0 - tpl.tilt);
    double k_attack = 1.0 - std::exp(-1.0 / (tpl.attack_s * sample_rate));
    double k_release = 1.0 - std::exp(-1.0 / (tpl.release_s * sample_rate));
    for (int s = 0; s < frame_stride; ++s) {
      double target = tpl.amp;
      env += (target - env) * (target > env ? k_attack : k_release);
      double harm = 0.0;
      if (tpl.voiced) {
        for (int h = 0; h < H; ++h)
          if ((h + 1) * f0 < nyq_limit) harm += eff[h] * std::sin(phase[h]);
      }
      double noise = tpl.noise_mix > 0.0 ? tpl.noise_mix * rng.normal() : 0.0;
      x[f * frame_stride + s] = env * (harm + noise);
      if (tpl.voiced) {
        double step = 2.0 * M_PI * f0 / sample_rate;
        for (int h = 0; h < H; ++h) {
          phase[h] += (h + 1) * step;
          if (phase[h] > 2.0 * M_PI) phase[h] -= 2.0 * M_PI * std::floor(phase[h] / (2.0 * M_PI));
        }
      }
    }
  }

  double peak = 0.0;
  for (int i = 0; i < T; ++i) peak = std::max(peak, std::fabs(x[i]));
  if (peak > 1e-9) {
    double scale = 0.95 / peak;
    for (int i = 0; i < T; ++i) x[i] *= scale;
  }
  return u;
}

std::vector<int> random_phoneme_seq(int frames, Rng& rng) {
  check_arg(frames > 0, "random_phoneme_seq: need at least one frame");
  // Runs of 2-6 frames per phoneme, mildly favoring voiced codes.
  std::vector<int> seq;
  seq.reserve(static_cast<size_t>(frames));
  while (static_cast<int>(seq.size()) < frames) {
    int code;
    double r = rng.uniform();
    if (r < 0.10) code = 0;                                       // silence
    else if (r < 0.80) code = 1 + static_cast<int>(rng.uniform_int(11));   // voiced
    else code = 12 + static_cast<int>(rng.uniform_int(4));        // unvoiced
    int run = 2 + static_cast<int>(rng.uniform_int(5));
    for (int i = 0; i < run && static_cast<int>(seq.size()) < frames; ++i)
      seq.push_back(code);
  }
  return seq;
}

SpeakerF0Stats compute_f0_stats(const std::vector<const Utterance*>& utts) {
  check_arg(!utts.empty(), "compute_f0_stats: no utterances");
  std::vector<double> logs;
  int speaker_id = utts[0]->speaker_id;
  for (const Utterance* u : utts) {
    check_arg(u->speaker_id == speaker_id,
              "compute_f0_stats: utterances from multiple speakers");
    for (double f0 : u->f0_hz)
      if (f0 > 0.0) logs.push_back(std::log(f0));
  }
  check_arg(!logs.empty(), "compute_f0_stats: no voiced frames");
  double mean = 0.0;
  for (double v : logs) mean += v;
  mean /= static_cast<double>(logs.size());
  double var = 0.0;
  for (double v : logs) var += (v - mean) * (v - mean);
  var /= static_cast<double>(logs.size());
  SpeakerF0Stats st;
  st.speaker_id = speaker_id;
  st.mean = mean;
  st.std = std::max(std::sqrt(var), 1e-3);
  return st;
}

SpeakerF0Stats compute_f0_stats(const std::vector<Utterance>& utts) {
  std::vector<const Utterance*> ptrs;
  ptrs.reserve(utts.size());
  for (const auto& u : utts) ptrs.push_back(&u);
  return compute_f0_stats(ptrs);
}

std::vector<double> normalize_f0(const std::vector<double>& f0_hz,
                                 const SpeakerF0Stats& stats) {
  check_arg(stats.std > 0.0, "normalize_f0: stats.std must be positive");
  std::vector<double> out(f0_hz.size(), 0.0);
  for (size_t i = 0; i < f0_hz.size(); ++i)
    if (f0_hz[i] > 0.0) out[i] = (std::log(f0_hz[i]) - stats.mean) / stats.std;
  return out;
}

CorpusSplit split_corpus(const std::vector<std::string>& utterance_ids,
                         int test_count, double holdout_fraction,
                         uint64_t seed) {
  int n = static_cast<int>(utterance_ids.size());
  check_arg(test_count >= 1, "split_corpus: test_count must be >= 1");
  check_arg(holdout_fraction >= 0.0 && holdout_fraction < 1.0,
            "split_corpus: holdout_fraction outside [0, 1)");
  check_arg(n > test_count, "split_corpus: not enough utterances");

  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  for (int i = n - 1; i > 0; --i)
    std::swap(order[i], order[rng.uniform_int(i + 1)]);

  CorpusSplit split;
  for (int i = 0; i < test_count; ++i)
    split.test.push_back(utterance_ids[order[i]]);
  for (int i = test_count; i < n; ++i)
    split.adaptation.push_back(utterance_ids[order[i]]);

  int n_adapt = static_cast<int>(split.adaptation.size());
  int n_hold = static_cast<int>(
      std::ceil(holdout_fraction * static_cast<double>(n_adapt)));
  check_arg(n_hold < n_adapt,
            "split_corpus: holdout would consume the whole adaptation set");
  for (int i = 0; i < n_hold; ++i) split.holdout.push_back(split.adaptation[i]);
  return split;
}

const Utterance& Corpus::by_id(const std::string& id) const {
  for (const auto& u : utterances)
    if (u.id == id) return u;
  throw ValidationError("no such utterance: " + id);
}

const SyntheticSpeaker& Corpus::speaker(int speaker_id) const {
  for (const auto& s : speakers)
    if (s.speaker_id == speaker_id) return s;
  throw ValidationError("no such speaker: " + std::to_string(speaker_id));
}

bool Corpus::is_train_speaker(int speaker_id) const {
  for (int id : train_speaker_ids)
    if (id == speaker_id) return true;
  return false;
}

int Corpus::train_index(int speaker_id) const {
  for (size_t i = 0; i < train_speaker_ids.size(); ++i)
    if (train_speaker_ids[i] == speaker_id) return static_cast<int>(i);
  throw ValidationError("not a train speaker: " + std::to_string(speaker_id));
}

Corpus build_corpus(const CorpusConfig& cfg, uint64_t seed) {
  check_arg(cfg.train_speakers >= 1 && cfg.heldout_speakers >= 0,
            "build_corpus: bad speaker counts");
  check_arg(cfg.frames_per_utterance >= 4, "build_corpus: utterances too short");
  check_arg(cfg.phoneme_classes == kPhonemeClasses,
            "build_corpus: phoneme inventory is fixed at 16");

  Corpus corpus;
  corpus.config = cfg;
  corpus.seed = seed;
  Rng root(seed);

  int total_speakers = cfg.train_speakers + cfg.heldout_speakers;
  for (int i = 0; i < total_speakers; ++i) {
    SyntheticSpeaker s = generate_speaker(hash_seed(seed, 1, i));
    s.speaker_id = i;
    corpus.speakers.push_back(std::move(s));
    if (i < cfg.train_speakers) corpus.train_speaker_ids.push_back(i);
    else corpus.heldout_speaker_ids.push_back(i);
  }

  for (int i = 0; i < total_speakers; ++i) {
    bool train = i < cfg.train_speakers;
    int count = train ? cfg.utterances_per_train_speaker
                      : cfg.utterances_per_heldout_speaker;
    for (int j = 0; j < count; ++j) {
      uint64_t u_seed = hash_seed(seed, 2, i, j);
      Rng seq_rng(hash_seed(u_seed, 1));
      std::vector<int> seq = random_phoneme_seq(cfg.frames_per_utterance, seq_rng);
      Utterance u = generate_utterance(corpus.speakers[i], seq,
                                       hash_seed(u_seed, 2), cfg.frame_stride,
                                       cfg.sample_rate);
      char buf[32];
      std::snprintf(buf, sizeof buf, "spk%02d_utt%03d", i, j);
      u.id = buf;
      corpus.speaker_utterances[i].push_back(static_cast<int>(corpus.utterances.size()));
      corpus.utterances.push_back(std::move(u));
    }
  }

  for (int id : corpus.train_speaker_ids) {
    std::vector<const Utterance*> utts;
    for (int idx : corpus.speaker_utterances[id])
      utts.push_back(&corpus.utterances[idx]);
    corpus.train_stats[id] = compute_f0_stats(utts);
  }

  for (int id : corpus.heldout_speaker_ids) {
    std::vector<std::string> ids;
    for (int idx : corpus.speaker_utterances[id])
      ids.push_back(corpus.utterances[idx].id);
    corpus.splits[id] = split_corpus(ids, cfg.test_count, cfg.holdout_fraction,
                                     hash_seed(seed, 3, id));
  }
  return corpus;
}

}  // namespace sea
