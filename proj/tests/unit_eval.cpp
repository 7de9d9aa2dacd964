#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "corpus/corpus.hpp"
#include "eval/features.hpp"
#include "eval/metrics.hpp"
#include "eval/verifier.hpp"
#include "testutil.hpp"

using namespace sea;

namespace {

// Brute-force EER reference: walk every distinct score ascending, tracking
// the FAR/FRR pair at each threshold and interpolating at the first
// crossing.  Written independently of the library sweep but following the
// same conventions (accept when score >= threshold, virtual top threshold),
// so agreement must be exact, not approximate.
EerResult sweep_eer(const std::vector<double>& gen,
                    const std::vector<double>& imp) {
  std::vector<double> ts;
  ts.insert(ts.end(), gen.begin(), gen.end());
  ts.insert(ts.end(), imp.begin(), imp.end());
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  auto rates = [&](double t, double* far, double* frr) {
    int64_t acc = 0, rej = 0;
    for (double s : imp)
      if (s >= t) ++acc;
    for (double s : gen)
      if (s < t) ++rej;
    *far = double(acc) / double(imp.size());
    *frr = double(rej) / double(gen.size());
  };
  double pt = ts[0];
  double pfar, pfrr;
  rates(pt, &pfar, &pfrr);
  for (size_t i = 1; i <= ts.size(); ++i) {
    double t, far, frr;
    if (i < ts.size()) {
      t = ts[i];
      rates(t, &far, &frr);
    } else {
      t = ts.back() + 1.0;
      far = 0.0;
      frr = 1.0;
    }
    if (pfar == pfrr) return {pfar, pt};
    if (far <= frr) {
      double num = pfar - pfrr;
      double den = (pfar - pfrr) + (frr - far);
      double alpha = den > 0.0 ? num / den : 0.0;
      return {pfar + (far - pfar) * alpha, pt + (t - pt) * alpha};
    }
    pt = t;
    pfar = far;
    pfrr = frr;
  }
  return {pfar, pt};
}

// Mann-Whitney AUC by sorted binary search instead of the library's direct
// double loop; the counted pairs are the same integers.
double pair_count_auc(const std::vector<double>& pos,
                      const std::vector<double>& neg) {
  std::vector<double> sn = neg;
  std::sort(sn.begin(), sn.end());
  int64_t greater = 0, ties = 0;
  for (double p : pos) {
    greater += std::lower_bound(sn.begin(), sn.end(), p) - sn.begin();
    auto er = std::equal_range(sn.begin(), sn.end(), p);
    ties += er.second - er.first;
  }
  return (double(greater) + 0.5 * double(ties)) /
         (double(pos.size()) * double(neg.size()));
}

std::vector<double> random_scores(Rng& rng, int n, bool quantized) {
  std::vector<double> s(n);
  for (double& x : s) {
    double u = rng.uniform(-1.0, 1.0);
    // Eighths are exact in binary, so quantized sets produce genuine ties.
    x = quantized ? std::floor(u * 8.0) / 8.0 : u;
  }
  return s;
}

DVector make_dvec(const std::string& id, int speaker,
                  std::vector<double> values) {
  DVector d;
  d.utterance_id = id;
  d.speaker_id = speaker;
  d.values = std::move(values);
  return d;
}

}  // namespace

TEST_CASE("band frequencies are geometric within the valid range") {
  SpectralConfig cfg;
  cfg.bands = 8;
  cfg.freq_lo = 100.0;
  cfg.freq_hi = 1600.0;
  auto f = band_frequencies(cfg, 4000);
  REQUIRE(f.size() == 8);
  CHECK(f.front() == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(f.back() == doctest::Approx(1600.0).epsilon(1e-12));
  // Constant ratio between neighbors.
  double r0 = f[1] / f[0];
  for (size_t i = 1; i + 1 < f.size(); ++i) {
    CHECK(f[i + 1] / f[i] == doctest::Approx(r0).epsilon(1e-12));
  }

  SpectralConfig bad = cfg;
  bad.freq_hi = 2500.0;  // past Nyquist at 4 kHz
  CHECK_THROWS_AS(band_frequencies(bad, 4000), ValidationError);
  bad = cfg;
  bad.bands = 1;
  CHECK_THROWS_AS(band_frequencies(bad, 4000), ValidationError);
  bad = cfg;
  bad.freq_lo = 0.0;
  CHECK_THROWS_AS(band_frequencies(bad, 4000), ValidationError);
}

TEST_CASE("spectral frames locate a pure tone in the right band") {
  SpectralConfig cfg;
  auto freqs = band_frequencies(cfg, 4000);
  const int target_band = 12;
  const double tone = freqs[target_band];

  Waveform w;
  w.sample_rate = 4000;
  w.samples.resize(800);
  for (size_t n = 0; n < w.samples.size(); ++n) {
    w.samples[n] = 0.7 * std::sin(2.0 * M_PI * tone * double(n) / 4000.0);
  }

  Tensor feats = spectral_frames(w, cfg);
  const int F = (int(w.samples.size()) - cfg.window) / cfg.hop + 1;
  REQUIRE(feats.rank() == 2);
  CHECK(feats.dim(0) == cfg.bands);
  CHECK(feats.dim(1) == F);
  for (int f = 0; f < F; ++f) {
    int best = 0;
    for (int b = 1; b < cfg.bands; ++b) {
      if (feats.at2(b, f) > feats.at2(best, f)) best = b;
    }
    CHECK(best == target_band);
  }

  Waveform tiny;
  tiny.sample_rate = 4000;
  tiny.samples.assign(cfg.window - 1, 0.0);
  CHECK_THROWS_AS(spectral_frames(tiny, cfg), ValidationError);
}

TEST_CASE("eer on hand-built score sets") {
  // Perfect separation.
  EerResult sep = compute_eer({0.8, 0.9, 0.95}, {0.1, 0.2, 0.3});
  CHECK(sep.eer == 0.0);

  // Identical distributions cross at one half.
  EerResult half = compute_eer({0.5}, {0.5});
  CHECK(half.eer == doctest::Approx(0.5).epsilon(1e-15));

  // Interleaved scores with a crossing at exactly one third.
  EerResult third = compute_eer({0.4, 0.6, 0.8}, {0.2, 0.5, 0.7});
  CHECK(third.eer == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(third.threshold == doctest::Approx(0.6).epsilon(1e-12));

  // Trial-vector overload splits by the genuine flag.
  std::vector<Trial> trials;
  for (double s : {0.4, 0.6, 0.8}) trials.push_back({0, 0, s, true});
  for (double s : {0.2, 0.5, 0.7}) trials.push_back({0, 1, s, false});
  EerResult via_trials = compute_eer(trials);
  CHECK(via_trials.eer == third.eer);
  CHECK(via_trials.threshold == third.threshold);

  CHECK_THROWS_AS(compute_eer({}, {0.1}), ValidationError);
  CHECK_THROWS_AS(compute_eer({0.1}, {}), ValidationError);
}

TEST_CASE("det curve spans both error axes") {
  std::vector<double> gen = {0.4, 0.6, 0.8};
  std::vector<double> imp = {0.2, 0.5, 0.7};
  auto det = det_curve(gen, imp);
  REQUIRE(det.size() == 8);  // 6 distinct scores + 2 endpoints
  CHECK(det.front().far == 1.0);
  CHECK(det.front().frr == 0.0);
  CHECK(std::isinf(det.front().threshold));
  CHECK(det.back().far == 0.0);
  CHECK(det.back().frr == 1.0);
  for (size_t i = 1; i < det.size(); ++i) {
    CHECK(det[i].threshold > det[i - 1].threshold);
    CHECK(det[i].far <= det[i - 1].far);
    CHECK(det[i].frr >= det[i - 1].frr);
  }
  // Interior point recomputation at threshold 0.5.
  CHECK(det[3].threshold == 0.5);
  CHECK(det[3].far == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(det[3].frr == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("auc pair-count toys") {
  RocResult r = roc_from_scores({0.8, 0.6, 0.4}, {0.1, 0.5, 0.3});
  CHECK(r.auc == 8.0 / 9.0);

  CHECK(roc_from_scores({0.9, 0.8}, {0.1, 0.2}).auc == 1.0);
  CHECK(roc_from_scores({0.1, 0.2}, {0.9, 0.8}).auc == 0.0);
  CHECK(roc_from_scores({0.5}, {0.5}).auc == 0.5);

  // Curve walks the unit square from (0,0) to (1,1).
  REQUIRE(r.points.size() >= 2);
  CHECK(r.points.front().fpr == 0.0);
  CHECK(r.points.front().tpr == 0.0);
  CHECK(r.points.back().fpr == 1.0);
  CHECK(r.points.back().tpr == 1.0);
  for (size_t i = 1; i < r.points.size(); ++i) {
    CHECK(r.points[i].fpr >= r.points[i - 1].fpr);
    CHECK(r.points[i].tpr >= r.points[i - 1].tpr);
  }

  CHECK_THROWS_AS(roc_from_scores({}, {0.1}), ValidationError);
  CHECK_THROWS_AS(roc_from_scores({0.1}, {}), ValidationError);
}

TEST_CASE("eer and auc match brute-force oracles on randomized score sets") {
  // 200 randomized sets of varying size; half use quantized scores so that
  // cross-set ties are common.  Agreement with the reference
  // implementations must be exact, and both statistics must be unchanged
  // by a strictly increasing score transform.
  auto warp = [](double s) { return 2.0 * s * s * s + s; };
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Rng rng(hash_seed(0x65657261756375ULL, uint64_t(trial)));
    const bool quantized = trial % 2 == 0;
    const int P = 1 + int(rng.uniform_int(40));
    const int N = 1 + int(rng.uniform_int(40));
    std::vector<double> gen = random_scores(rng, P, quantized);
    std::vector<double> imp = random_scores(rng, N, quantized);

    EerResult lib = compute_eer(gen, imp);
    EerResult ref = sweep_eer(gen, imp);
    CHECK(lib.eer == ref.eer);
    CHECK(lib.threshold == ref.threshold);
    CHECK(lib.eer >= 0.0);
    CHECK(lib.eer <= 1.0);

    RocResult roc = roc_from_scores(gen, imp);
    CHECK(roc.auc == pair_count_auc(gen, imp));

    std::vector<double> gen_w = gen, imp_w = imp;
    for (double& s : gen_w) s = warp(s);
    for (double& s : imp_w) s = warp(s);
    CHECK(compute_eer(gen_w, imp_w).eer == lib.eer);
    CHECK(roc_from_scores(gen_w, imp_w).auc == roc.auc);
    ++checked;
  }
  CHECK(checked == 200);
}

TEST_CASE("enrollment averages and renormalizes") {
  std::vector<DVector> enc = {make_dvec("a", 3, {1.0, 0.0}),
                              make_dvec("b", 3, {0.0, 1.0})};
  Centroid c = enroll(3, enc);
  CHECK(c.speaker_id == 3);
  REQUIRE(c.values.size() == 2);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  CHECK(c.values[0] == doctest::Approx(inv_sqrt2).epsilon(1e-12));
  CHECK(c.values[1] == doctest::Approx(inv_sqrt2).epsilon(1e-12));
  double norm = std::sqrt(c.values[0] * c.values[0] + c.values[1] * c.values[1]);
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(enroll(0, {}), ValidationError);
  std::vector<DVector> cancel = {make_dvec("a", 0, {1.0, 0.0}),
                                 make_dvec("b", 0, {-1.0, 0.0})};
  CHECK_THROWS_AS(enroll(0, cancel), NumericError);
  std::vector<DVector> ragged = {make_dvec("a", 0, {1.0, 0.0}),
                                 make_dvec("b", 0, {1.0, 0.0, 0.0})};
  CHECK_THROWS_AS(enroll(0, ragged), ValidationError);
}

TEST_CASE("cosine score basics") {
  CHECK(cosine_score({1.0, 0.0}, {0.0, 1.0}) == doctest::Approx(0.0));
  CHECK(cosine_score({1.0, 2.0}, {2.0, 4.0}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cosine_score({1.0, 0.0}, {-2.0, 0.0}) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK_THROWS_AS(cosine_score({1.0}, {1.0, 2.0}), ValidationError);
  CHECK_THROWS_AS(cosine_score({0.0, 0.0}, {1.0, 0.0}), NumericError);
}

TEST_CASE("trial construction policies") {
  std::vector<Centroid> cents(3);
  for (int s = 0; s < 3; ++s) {
    cents[s].speaker_id = s;
    cents[s].values.assign(3, 0.1);
    cents[s].values[s] = 1.0;
  }
  std::vector<DVector> probes;
  for (int s = 0; s < 3; ++s) {
    for (int k = 0; k < 2; ++k) {
      std::vector<double> v(3, 0.05 * (k + 1));
      v[s] = 0.9;
      probes.push_back(make_dvec("p", s, v));
    }
  }

  auto own = build_trials(cents, probes, TrialPolicy::kOwn, 1);
  REQUIRE(own.size() == probes.size());
  for (size_t i = 0; i < own.size(); ++i) {
    CHECK(own[i].genuine);
    CHECK(own[i].target_speaker == own[i].probe_speaker);
    CHECK(own[i].score ==
          cosine_score(cents[own[i].target_speaker].values, probes[i].values));
  }

  auto other = build_trials(cents, probes, TrialPolicy::kOther, 1);
  REQUIRE(other.size() == probes.size());
  for (const auto& t : other) {
    CHECK_FALSE(t.genuine);
    CHECK(t.target_speaker != t.probe_speaker);
  }

  auto all = build_trials(cents, probes, TrialPolicy::kExhaustive, 1);
  REQUIRE(all.size() == probes.size() * cents.size());
  int genuine_count = 0;
  for (const auto& t : all) genuine_count += t.genuine ? 1 : 0;
  CHECK(genuine_count == int(probes.size()));

  auto r1 = build_trials(cents, probes, TrialPolicy::kRandom, 7);
  auto r2 = build_trials(cents, probes, TrialPolicy::kRandom, 7);
  REQUIRE(r1.size() == r2.size());
  for (size_t i = 0; i < r1.size(); ++i) {
    CHECK(r1[i].target_speaker == r2[i].target_speaker);
    CHECK(r1[i].score == r2[i].score);
  }

  std::vector<DVector> stranger = {make_dvec("s", 9, {1.0, 0.0, 0.0})};
  CHECK_THROWS_AS(build_trials(cents, stranger, TrialPolicy::kOwn, 1),
                  ValidationError);
  std::vector<Centroid> lone = {cents[0]};
  CHECK_THROWS_AS(build_trials(lone, probes, TrialPolicy::kOther, 1),
                  ValidationError);
  CHECK_THROWS_AS(build_trials({}, probes, TrialPolicy::kOwn, 1), ValidationError);
  CHECK_THROWS_AS(build_trials(cents, {}, TrialPolicy::kOwn, 1), ValidationError);
}

TEST_CASE("d-vector files round trip") {
  seatest::TempDir tmp("sea_eval");
  std::vector<DVector> dv = {make_dvec("u0", 0, {0.25, -0.5, 0.125, 1.0}),
                             make_dvec("u1", 2, {1e-300, 0.0, -1.0, 3.5}),
                             make_dvec("u2", 5, {0.1, 0.2, 0.3, 0.4})};
  std::vector<uint8_t> tags = {0, 1, 1};
  const std::string path = tmp.sub("dv.seav");
  write_dvectors(path, dv, tags);

  std::vector<uint8_t> tags_in;
  auto back = read_dvectors(path, &tags_in);
  REQUIRE(back.size() == dv.size());
  CHECK(tags_in == tags);
  for (size_t i = 0; i < dv.size(); ++i) {
    CHECK(back[i].utterance_id == dv[i].utterance_id);
    CHECK(back[i].speaker_id == dv[i].speaker_id);
    REQUIRE(back[i].values.size() == dv[i].values.size());
    for (size_t j = 0; j < dv[i].values.size(); ++j) {
      CHECK(back[i].values[j] == dv[i].values[j]);  // bit-exact
    }
  }
  // Tags pointer is optional on read.
  auto no_tags = read_dvectors(path, nullptr);
  CHECK(no_tags.size() == dv.size());

  CHECK_THROWS_AS(write_dvectors(tmp.sub("bad.seav"), dv, {0, 1}),
                  ValidationError);
  {
    std::ofstream os(tmp.sub("junk.seav"), std::ios::binary);
    os << "not a d-vector file";
  }
  CHECK_THROWS_AS(read_dvectors(tmp.sub("junk.seav"), nullptr), IoError);
  CHECK_THROWS_AS(read_dvectors(tmp.sub("missing.seav"), nullptr), IoError);
}

TEST_CASE("verifier learns to separate synthetic speakers") {
  CorpusConfig ccfg;
  ccfg.frames_per_utterance = 24;  // 1536 samples: enough analysis windows
  ccfg.train_speakers = 4;         // per utterance for a stable signature
  ccfg.heldout_speakers = 2;
  ccfg.utterances_per_train_speaker = 15;
  ccfg.utterances_per_heldout_speaker = 8;
  ccfg.test_count = 2;
  Corpus corpus = build_corpus(ccfg, 91);

  VerifierConfig vcfg;
  vcfg.num_speakers = 4;

  // Identical seeds give identical initializations.
  Verifier a(vcfg, 5), b(vcfg, 5);
  for (size_t i = 0; i < a.params().size(); ++i) {
    CHECK(a.params().at(i).t.v == b.params().at(i).t.v);
  }

  VerifierTrainSpec spec;
  spec.steps = 800;
  spec.log_interval = 200;
  VerifierReport report = train_verifier(a, corpus, spec, 17);
  REQUIRE(!report.nll.empty());
  CHECK(report.nll.back() < report.nll.front());
  CHECK(report.quality.accuracy >= 0.9);
  CHECK(report.quality.margin() > 0.2);

  // The public d-vector is the normalized penultimate activation.
  const Utterance& u = corpus.utterances[0];
  std::vector<double> d = a.dvector(u.waveform);
  REQUIRE(int(d.size()) == vcfg.dvector_dim);
  double ss = 0.0;
  for (double x : d) ss += x * x;
  CHECK(std::sqrt(ss) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(a.dvector(u.waveform) == d);  // deterministic

  // classify agrees with argmax over the classification head applied to
  // the raw d-vector.
  Tensor feats = spectral_frames(u.waveform, vcfg.spectral);
  std::vector<double> raw = a.dvector_raw(feats);
  const Tensor& hw = a.params().get("head.w").t;
  const Tensor& hb = a.params().get("head.b").t;
  int best = 0;
  double best_v = -1e300;
  for (int s = 0; s < vcfg.num_speakers; ++s) {
    double acc = hb.v[s];
    for (int i = 0; i < vcfg.dvector_dim; ++i) acc += hw.at2(s, i) * raw[i];
    if (acc > best_v) {
      best_v = acc;
      best = s;
    }
  }
  CHECK(a.classify(feats) == best);

  // Config json round trip.
  VerifierConfig back = verifier_config_from_json(verifier_config_to_json(vcfg));
  CHECK(back.spectral.bands == vcfg.spectral.bands);
  CHECK(back.channels == vcfg.channels);
  CHECK(back.dvector_dim == vcfg.dvector_dim);
  CHECK(back.num_speakers == vcfg.num_speakers);

  // Restore constructor validates the parameter set.
  Verifier c(vcfg, a.params().clone());
  CHECK(c.dvector(u.waveform) == d);
  ParamSet missing;
  missing.add("conv1.w", Tensor({32, 24, 3}));
  CHECK_THROWS_AS(Verifier(vcfg, std::move(missing)), ValidationError);

  VerifierConfig badcfg = vcfg;
  badcfg.num_speakers = 1;
  CHECK_THROWS_AS(Verifier(badcfg, 1), ValidationError);
}
