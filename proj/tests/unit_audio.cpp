#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <fstream>

#include "audio/mulaw.hpp"
#include "audio/wavio.hpp"
#include "common/error.hpp"
#include "common/rng.hpp"
#include "testutil.hpp"

using namespace sea;

TEST_CASE("compand hits the textbook value at x = 0.1") {
  double want = std::log(26.5) / std::log(256.0);
  CHECK(mulaw_compand(0.1, 255) == doctest::Approx(want).epsilon(1e-15));
  CHECK(mulaw_encode_sample(0.1, 255, 256) == 203);
}

TEST_CASE("compand fixes zero and the endpoints") {
  CHECK(mulaw_compand(0.0, 255) == 0.0);
  CHECK(mulaw_compand(1.0, 255) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(mulaw_compand(-1.0, 255) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(mulaw_expand(0.0, 255) == 0.0);
}

TEST_CASE("compand is odd and monotone") {
  Rng rng(3);
  double prev = mulaw_compand(-1.0, 255);
  for (int i = 1; i <= 200; ++i) {
    double x = -1.0 + 2.0 * double(i) / 200.0;
    double y = mulaw_compand(x, 255);
    CHECK(y > prev);
    prev = y;
    CHECK(mulaw_compand(-x, 255) == doctest::Approx(-y).epsilon(1e-15));
  }
}

TEST_CASE("expand inverts compand") {
  for (int i = 0; i <= 100; ++i) {
    double x = -1.0 + 2.0 * double(i) / 100.0;
    double rt = mulaw_expand(mulaw_compand(x, 255), 255);
    CHECK(rt == doctest::Approx(x).epsilon(1e-12));
  }
}

TEST_CASE("zero maps to the middle class") {
  CHECK(mulaw_encode_sample(0.0, 255, 256) == 128);
  // The decoded center of the middle bin is small and positive.
  double c = mulaw_decode_class(128, 255, 256);
  CHECK(c > 0.0);
  CHECK(c < 1e-3);
}

TEST_CASE("encode clamps the extremes into valid classes") {
  CHECK(mulaw_encode_sample(1.0, 255, 256) == 255);
  CHECK(mulaw_encode_sample(-1.0, 255, 256) == 0);
  CHECK_THROWS_AS(mulaw_encode_sample(1.5, 255, 256), ValidationError);
  CHECK_THROWS_AS(mulaw_decode_class(256, 255, 256), ValidationError);
  CHECK_THROWS_AS(mulaw_decode_class(-1, 255, 256), ValidationError);
}

TEST_CASE("companded round trip error is bounded by one half bin") {
  // Dense grid over [-1, 1]; decode returns bin centers, so the error in
  // the companded domain must stay within half a bin (1/256 for Q=256).
  const int n = 100000;
  double worst = 0.0;
  for (int i = 0; i <= n; ++i) {
    double x = -1.0 + 2.0 * double(i) / double(n);
    int cls = mulaw_encode_sample(x, 255, 256);
    double back = mulaw_decode_class(cls, 255, 256);
    double err = std::fabs(mulaw_compand(back, 255) - mulaw_compand(x, 255));
    worst = std::max(worst, err);
  }
  CHECK(worst <= 1.0 / 256.0);
}

TEST_CASE("vector encode and decode preserve metadata") {
  Waveform w;
  w.sample_rate = 8000;
  Rng rng(17);
  for (int i = 0; i < 500; ++i) w.samples.push_back(rng.uniform(-1.0, 1.0));
  QuantizedWaveform q = mulaw_encode(w);
  CHECK(q.sample_rate == 8000);
  CHECK(q.quantization == 256);
  REQUIRE(q.classes.size() == w.samples.size());
  for (int c : q.classes) {
    CHECK(c >= 0);
    CHECK(c < 256);
  }
  Waveform back = mulaw_decode(q);
  CHECK(back.sample_rate == 8000);
  REQUIRE(back.samples.size() == w.samples.size());
  // Mu-law is coarse near full scale and fine near zero, so check the
  // companded-domain error rather than the raw one.
  for (size_t i = 0; i < w.samples.size(); ++i) {
    double err = std::fabs(mulaw_compand(back.samples[i], 255) -
                           mulaw_compand(w.samples[i], 255));
    CHECK(err <= 1.0 / 256.0);
  }
}

TEST_CASE("wav files round trip within PCM16 quantization") {
  seatest::TempDir td("sea_wav");
  Waveform w;
  w.sample_rate = 4000;
  Rng rng(5);
  for (int i = 0; i < 300; ++i) w.samples.push_back(rng.uniform(-1.0, 1.0));
  std::string p = td.sub("t.wav");
  write_wav(p, w);

  std::ifstream f(p, std::ios::binary | std::ios::ate);
  REQUIRE(f.good());
  CHECK(size_t(f.tellg()) == 44 + 2 * w.samples.size());

  Waveform r = read_wav(p);
  CHECK(r.sample_rate == 4000);
  REQUIRE(r.samples.size() == w.samples.size());
  // Write scales by 32767 and read divides by 32768, so the round-trip
  // error bound is (|x| + 1/2) / 32768.
  for (size_t i = 0; i < w.samples.size(); ++i)
    CHECK(std::fabs(r.samples[i] - w.samples[i]) <= 1.5 / 32768.0);
}

TEST_CASE("wav reader rejects garbage") {
  seatest::TempDir td("sea_wavbad");
  std::string p = td.sub("bad.wav");
  {
    std::ofstream f(p, std::ios::binary);
    f << "definitely not a riff file";
  }
  CHECK_THROWS_AS(read_wav(p), IoError);
  CHECK_THROWS_AS(read_wav(td.sub("missing.wav")), IoError);
}

TEST_CASE("raw f64 container is bit exact") {
  seatest::TempDir td("sea_raw");
  Waveform w;
  w.sample_rate = 16000;
  Rng rng(9);
  for (int i = 0; i < 257; ++i) w.samples.push_back(rng.normal() * 0.3);
  w.samples.push_back(0.1 + 0.2);  // a value with inexact binary expansion
  std::string p = td.sub("t.sear");
  write_raw_f64(p, w);
  Waveform r = read_raw_f64(p);
  CHECK(r.sample_rate == 16000);
  REQUIRE(r.samples.size() == w.samples.size());
  for (size_t i = 0; i < w.samples.size(); ++i)
    CHECK(r.samples[i] == w.samples[i]);

  // Writing the same waveform twice gives identical bytes.
  std::string p2 = td.sub("t2.sear");
  write_raw_f64(p2, w);
  CHECK(seatest::same_bytes(p, p2));
}
