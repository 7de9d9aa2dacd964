#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "corpus/corpus.hpp"
#include "corpus/corpus_io.hpp"
#include "testutil.hpp"

using namespace sea;

namespace {

// Single-bin DFT magnitude, for locating spectral peaks.
double dft_mag(const std::vector<double>& x, double freq, int sample_rate) {
  double re = 0.0, im = 0.0;
  for (size_t n = 0; n < x.size(); ++n) {
    double ph = 2.0 * M_PI * freq * double(n) / double(sample_rate);
    re += x[n] * std::cos(ph);
    im -= x[n] * std::sin(ph);
  }
  return std::sqrt(re * re + im * im);
}

Utterance toy_utt(int speaker_id, std::vector<double> f0_hz) {
  Utterance u;
  u.speaker_id = speaker_id;
  u.frame_stride = 4;
  u.f0_hz = std::move(f0_hz);
  u.phoneme_codes.assign(u.f0_hz.size(), 1);
  for (size_t i = 0; i < u.f0_hz.size(); ++i)
    if (u.f0_hz[i] == 0.0) u.phoneme_codes[i] = 0;
  u.waveform.samples.assign(u.f0_hz.size() * 4, 0.0);
  return u;
}

}  // namespace

TEST_CASE("speakers are deterministic with sane knobs") {
  SyntheticSpeaker a = generate_speaker(77);
  SyntheticSpeaker b = generate_speaker(77);
  SyntheticSpeaker c = generate_speaker(78);
  CHECK(a.f0_mean == b.f0_mean);
  CHECK(a.harmonic_amplitudes == b.harmonic_amplitudes);
  CHECK(a.f0_mean != c.f0_mean);

  CHECK(a.f0_mean >= 90.0);
  CHECK(a.f0_mean <= 300.0);
  CHECK(a.f0_std >= 1.0);
  CHECK(a.f0_std <= 8.0);
  CHECK(a.vibrato_depth >= 0.005);
  CHECK(a.vibrato_depth <= 0.030);
  REQUIRE(int(a.harmonic_amplitudes.size()) == kHarmonics);
  double l1 = 0.0;
  for (double h : a.harmonic_amplitudes) {
    CHECK(h >= 0.0);
    l1 += h;
  }
  CHECK(l1 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("utterances align waveform, codes and f0") {
  SyntheticSpeaker spk = generate_speaker(5);
  spk.speaker_id = 3;
  std::vector<int> seq = {0, 0, 1, 1, 1, 13, 13, 2, 2, 0};
  Utterance u = generate_utterance(spk, seq, 99, 64, 4000);
  CHECK(u.speaker_id == 3);
  CHECK(u.frames() == 10);
  CHECK(u.frame_stride == 64);
  CHECK(u.waveform.samples.size() == 640);
  CHECK(u.waveform.sample_rate == 4000);
  for (int f = 0; f < u.frames(); ++f) {
    bool tpl_voiced = phoneme_template(seq[size_t(f)]).voiced;
    CHECK(u.voiced(f) == tpl_voiced);
    if (tpl_voiced) {
      CHECK(u.f0_hz[size_t(f)] >= 40.0);
    } else {
      CHECK(u.f0_hz[size_t(f)] == 0.0);
    }
  }
  for (double x : u.waveform.samples) CHECK(std::fabs(x) <= 0.95 + 1e-12);

  Utterance u2 = generate_utterance(spk, seq, 99, 64, 4000);
  CHECK(u2.waveform.samples == u.waveform.samples);
  CHECK(u2.f0_hz == u.f0_hz);
  Utterance u3 = generate_utterance(spk, seq, 100, 64, 4000);
  CHECK(u3.waveform.samples != u.waveform.samples);
}

TEST_CASE("rendered audio peaks at the speaker pitch") {
  // A speaker with a single harmonic, no vibrato and no pitch spread
  // renders a voiced phoneme as a near-pure 200 Hz tone.
  SyntheticSpeaker spk;
  spk.speaker_id = 0;
  spk.harmonic_amplitudes.assign(kHarmonics, 0.0);
  spk.harmonic_amplitudes[0] = 1.0;
  spk.f0_mean = 200.0;
  spk.f0_std = 1e-12;
  spk.vibrato_rate = 5.0;
  spk.vibrato_depth = 0.0;
  std::vector<int> seq(32, 1);
  Utterance u = generate_utterance(spk, seq, 7, 64, 4000);
  for (double f0 : u.f0_hz) CHECK(f0 == doctest::Approx(200.0).epsilon(1e-9));

  double at_f0 = dft_mag(u.waveform.samples, 200.0, 4000);
  CHECK(at_f0 > 5.0 * dft_mag(u.waveform.samples, 130.0, 4000));
  CHECK(at_f0 > 5.0 * dft_mag(u.waveform.samples, 287.0, 4000));
  CHECK(at_f0 > 5.0 * dft_mag(u.waveform.samples, 400.0, 4000));
}

TEST_CASE("phoneme sequences stay in range and form runs") {
  Rng rng(21);
  std::vector<int> seq = random_phoneme_seq(200, rng);
  REQUIRE(int(seq.size()) == 200);
  int run_breaks = 0;
  for (size_t i = 0; i < seq.size(); ++i) {
    CHECK(seq[i] >= 0);
    CHECK(seq[i] < kPhonemeClasses);
    if (i > 0 && seq[i] != seq[i - 1]) ++run_breaks;
  }
  // Runs of 2-6 frames mean far fewer transitions than frames.
  CHECK(run_breaks < 120);
  CHECK(run_breaks > 10);
}

TEST_CASE("f0 statistics match a hand computation") {
  // Voiced log-f0 values {4.6, 4.8, 5.0} spread over two utterances with
  // unvoiced frames mixed in: mean 4.8, population std sqrt(2/75).
  std::vector<Utterance> utts;
  utts.push_back(toy_utt(9, {std::exp(4.6), 0.0, std::exp(4.8)}));
  utts.push_back(toy_utt(9, {0.0, std::exp(5.0)}));
  SpeakerF0Stats st = compute_f0_stats(utts);
  CHECK(st.speaker_id == 9);
  CHECK(st.mean == doctest::Approx(4.8).epsilon(1e-14));
  CHECK(st.std == doctest::Approx(std::sqrt(2.0 / 75.0)).epsilon(1e-12));
}

TEST_CASE("f0 statistics reject bad pools") {
  std::vector<Utterance> empty;
  CHECK_THROWS_AS(compute_f0_stats(empty), ValidationError);

  std::vector<Utterance> mixed;
  mixed.push_back(toy_utt(1, {100.0}));
  mixed.push_back(toy_utt(2, {100.0}));
  CHECK_THROWS_AS(compute_f0_stats(mixed), ValidationError);

  std::vector<Utterance> silent;
  silent.push_back(toy_utt(1, {0.0, 0.0}));
  CHECK_THROWS_AS(compute_f0_stats(silent), ValidationError);
}

TEST_CASE("f0 std is floored for degenerate speakers") {
  std::vector<Utterance> utts;
  utts.push_back(toy_utt(4, {150.0, 150.0, 150.0}));
  SpeakerF0Stats st = compute_f0_stats(utts);
  CHECK(st.std == 1e-3);
}

TEST_CASE("normalize_f0 zeroes unvoiced frames and standardizes voiced ones") {
  SpeakerF0Stats st;
  st.mean = 4.8;
  st.std = std::sqrt(2.0 / 75.0);
  std::vector<double> f0 = {std::exp(4.6), 0.0, std::exp(4.8), std::exp(5.0)};
  std::vector<double> z = normalize_f0(f0, st);
  REQUIRE(z.size() == 4);
  CHECK(z[0] == doctest::Approx(-0.2 / st.std).epsilon(1e-12));
  CHECK(z[1] == 0.0);
  CHECK(z[2] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(z[3] == doctest::Approx(0.2 / st.std).epsilon(1e-12));

  // Pooled over the fitting set, voiced values standardize exactly.
  double mean = (z[0] + z[2] + z[3]) / 3.0;
  double var = (z[0] * z[0] + z[2] * z[2] + z[3] * z[3]) / 3.0 - mean * mean;
  CHECK(std::fabs(mean) <= 1e-12);
  CHECK(std::fabs(std::sqrt(var) - 1.0) <= 1e-12);
}

TEST_CASE("corpus split partitions and pins the holdout prefix") {
  std::vector<std::string> ids;
  for (int i = 0; i < 25; ++i) ids.push_back("u" + std::to_string(i));
  CorpusSplit s = split_corpus(ids, 6, 0.10, 12345);
  CHECK(s.test.size() == 6);
  CHECK(s.adaptation.size() == 19);
  // ceil(0.10 * 19) = 2, taken from the front of the adaptation list.
  REQUIRE(s.holdout.size() == 2);
  CHECK(s.holdout[0] == s.adaptation[0]);
  CHECK(s.holdout[1] == s.adaptation[1]);

  std::set<std::string> all(s.test.begin(), s.test.end());
  for (const auto& id : s.adaptation) all.insert(id);
  CHECK(all.size() == 25);

  CorpusSplit s2 = split_corpus(ids, 6, 0.10, 12345);
  CHECK(s2.test == s.test);
  CHECK(s2.adaptation == s.adaptation);
  CorpusSplit s3 = split_corpus(ids, 6, 0.10, 54321);
  CHECK(s3.test != s.test);
}

TEST_CASE("corpus split input validation") {
  std::vector<std::string> ids = {"a", "b", "c"};
  CHECK_THROWS_AS(split_corpus(ids, 3, 0.1, 1), ValidationError);
  CHECK_THROWS_AS(split_corpus(ids, 0, 0.1, 1), ValidationError);
  CHECK_THROWS_AS(split_corpus(ids, 1, 1.0, 1), ValidationError);
  CorpusSplit s = split_corpus(ids, 1, 0.0, 1);
  CHECK(s.holdout.empty());
}

TEST_CASE("a small corpus has the advertised shape") {
  CorpusConfig cfg;
  cfg.train_speakers = 3;
  cfg.heldout_speakers = 2;
  cfg.utterances_per_train_speaker = 4;
  cfg.utterances_per_heldout_speaker = 8;
  cfg.frames_per_utterance = 6;
  cfg.test_count = 2;
  Corpus c = build_corpus(cfg, 31);

  CHECK(c.seed == 31);
  CHECK(c.speakers.size() == 5);
  CHECK(c.train_speaker_ids == std::vector<int>{0, 1, 2});
  CHECK(c.heldout_speaker_ids == std::vector<int>{3, 4});
  CHECK(c.utterances.size() == 3 * 4 + 2 * 8);
  CHECK(c.train_stats.size() == 3);
  CHECK(c.splits.size() == 2);
  CHECK(c.train_index(1) == 1);
  CHECK_THROWS_AS(c.train_index(3), ValidationError);
  CHECK(c.is_train_speaker(2));
  CHECK_FALSE(c.is_train_speaker(3));

  for (const auto& [sid, indices] : c.speaker_utterances) {
    for (int idx : indices) CHECK(c.utterances[size_t(idx)].speaker_id == sid);
  }
  const Utterance& u = c.by_id("spk00_utt002");
  CHECK(u.speaker_id == 0);
  CHECK(u.frames() == 6);
  CHECK_THROWS_AS(c.by_id("nope"), ValidationError);

  for (const auto& [sid, split] : c.splits) {
    CHECK(split.test.size() == 2);
    CHECK(split.adaptation.size() == 6);
    CHECK(split.holdout.size() == 1);
    CHECK(split.holdout[0] == split.adaptation[0]);
  }

  Corpus c2 = build_corpus(cfg, 31);
  CHECK(c2.utterances.size() == c.utterances.size());
  for (size_t i = 0; i < c.utterances.size(); ++i)
    CHECK(c2.utterances[i].waveform.samples == c.utterances[i].waveform.samples);
}

TEST_CASE("corpus io round trips bit exactly") {
  CorpusConfig cfg;
  cfg.train_speakers = 2;
  cfg.heldout_speakers = 1;
  cfg.utterances_per_train_speaker = 3;
  cfg.utterances_per_heldout_speaker = 5;
  cfg.frames_per_utterance = 5;
  cfg.test_count = 2;
  Corpus c = build_corpus(cfg, 8);

  seatest::TempDir td("sea_corpus");
  save_corpus(c, td.path());
  Corpus r = load_corpus(td.path());

  CHECK(r.seed == c.seed);
  CHECK(corpus_config_to_json(r.config) == corpus_config_to_json(c.config));
  REQUIRE(r.utterances.size() == c.utterances.size());
  for (size_t i = 0; i < c.utterances.size(); ++i) {
    const Utterance& a = c.utterances[i];
    const Utterance& b = r.utterances[i];
    CHECK(a.id == b.id);
    CHECK(a.speaker_id == b.speaker_id);
    CHECK(a.waveform.samples == b.waveform.samples);
    CHECK(a.phoneme_codes == b.phoneme_codes);
    CHECK(a.f0_hz == b.f0_hz);
  }
  REQUIRE(r.train_stats.size() == c.train_stats.size());
  for (const auto& [sid, st] : c.train_stats) {
    CHECK(r.train_stats.at(sid).mean == st.mean);
    CHECK(r.train_stats.at(sid).std == st.std);
  }
  for (const auto& [sid, split] : c.splits) {
    CHECK(r.splits.at(sid).adaptation == split.adaptation);
    CHECK(r.splits.at(sid).test == split.test);
    CHECK(r.splits.at(sid).holdout == split.holdout);
  }

  // Saving the loaded corpus again reproduces identical artifacts.
  seatest::TempDir td2("sea_corpus2");
  save_corpus(r, td2.path());
  CHECK(seatest::same_bytes(td.sub("manifest.json"), td2.sub("manifest.json")));
  CHECK(seatest::same_bytes(td.sub("raw/spk00_utt000.f64"),
                            td2.sub("raw/spk00_utt000.f64")));
  CHECK(seatest::same_bytes(td.sub("feat/spk01_utt002.seaf"),
                            td2.sub("feat/spk01_utt002.seaf")));
}

TEST_CASE("corpus loading detects a corrupted artifact") {
  CorpusConfig cfg;
  cfg.train_speakers = 1;
  cfg.heldout_speakers = 1;
  cfg.utterances_per_train_speaker = 2;
  cfg.utterances_per_heldout_speaker = 4;
  cfg.frames_per_utterance = 4;
  cfg.test_count = 1;
  Corpus c = build_corpus(cfg, 3);
  seatest::TempDir td("sea_corrupt");
  save_corpus(c, td.path());

  std::string victim = td.sub("feat/spk00_utt001.seaf");
  std::fstream f(victim, std::ios::in | std::ios::out | std::ios::binary);
  REQUIRE(f.good());
  f.seekg(10);
  char b = 0;
  f.read(&b, 1);
  f.seekp(10);
  b = char(b ^ 0x5a);
  f.write(&b, 1);
  f.close();

  CHECK_THROWS_AS(load_corpus(td.path()), ValidationError);
}

TEST_CASE("corpus config json round trips") {
  CorpusConfig cfg;
  cfg.sample_rate = 8000;
  cfg.frames_per_utterance = 48;
  cfg.holdout_fraction = 0.25;
  CorpusConfig back = corpus_config_from_json(corpus_config_to_json(cfg));
  CHECK(corpus_config_to_json(back) == corpus_config_to_json(cfg));

  // Sparse json falls back to defaults for missing keys.
  CorpusConfig sparse = corpus_config_from_json(nlohmann::json{{"sample_rate", 16000}});
  CHECK(sparse.sample_rate == 16000);
  CHECK(sparse.frame_stride == CorpusConfig{}.frame_stride);
}
