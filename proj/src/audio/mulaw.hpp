// audio/mulaw.hpp
//
// Mu-law companding and uniform quantization of [-1, 1] audio into Q
// discrete classes.  Encoding bins the companded value over [-1, 1) with
// half-open bins; decoding returns bin centers, so a zero sample maps to
// class Q/2 and back to a small positive center, and the companded-domain
// round-trip error is bounded by one bin width.

#pragma once

#include <cstdint>
#include <vector>

namespace sea {

struct Waveform {
  std::vector<double> samples;  // in [-1, 1]
  int sample_rate = 4000;
};

struct QuantizedWaveform {
  std::vector<int> classes;  // in [0, quantization)
  int sample_rate = 4000;
  int quantization = 256;
};

double mulaw_compand(double x, int mu);
double mulaw_expand(double y, int mu);

int mulaw_encode_sample(double x, int mu, int levels);
double mulaw_decode_class(int cls, int mu, int levels);

QuantizedWaveform mulaw_encode(const Waveform& w, int mu = 255, int levels = 256);
Waveform mulaw_decode(const QuantizedWaveform& q, int mu = 255);

}  // namespace sea
