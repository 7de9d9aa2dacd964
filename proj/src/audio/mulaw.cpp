// audio/mulaw.cpp

#include "audio/mulaw.hpp"

#include <cmath>

#include "common/error.hpp"

namespace sea {

double mulaw_compand(double x, int mu) {
  check_arg(mu >= 1, "mulaw: mu must be >= 1");
  double m = static_cast<double>(mu);
  double y = std::log1p(m * std::fabs(x)) / std::log1p(m);
  return x < 0.0 ? -y : y;
}

double mulaw_expand(double y, int mu) {
  check_arg(mu >= 1, "mulaw: mu must be >= 1");
  double m = static_cast<double>(mu);
  double x = (std::pow(1.0 + m, std::fabs(y)) - 1.0) / m;
  return y < 0.0 ? -x : x;
}

int mulaw_encode_sample(double x, int mu, int levels) {
  check_arg(levels >= 2, "mulaw: need at least 2 levels");
  check_arg(x >= -1.0 && x <= 1.0, "mulaw: sample outside [-1, 1]");
  double y = mulaw_compand(x, mu);
  int cls = static_cast<int>(std::floor((y + 1.0) / 2.0 * levels));
  if (cls >= levels) cls = levels - 1;  // y == 1.0 lands in the top bin
  if (cls < 0) cls = 0;
  return cls;
}

double mulaw_decode_class(int cls, int mu, int levels) {
  check_arg(levels >= 2, "mulaw: need at least 2 levels");
  check_arg(cls >= 0 && cls < levels, "mulaw: class out of range");
  double center = (2.0 * (cls + 0.5)) / levels - 1.0;
  return mulaw_expand(center, mu);
}

QuantizedWaveform mulaw_encode(const Waveform& w, int mu, int levels) {
  QuantizedWaveform q;
  q.sample_rate = w.sample_rate;
  q.quantization = levels;
  q.classes.resize(w.samples.size());
  for (size_t i = 0; i < w.samples.size(); ++i)
    q.classes[i] = mulaw_encode_sample(w.samples[i], mu, levels);
  return q;
}

Waveform mulaw_decode(const QuantizedWaveform& q, int mu) {
  Waveform w;
  w.sample_rate = q.sample_rate;
  w.samples.resize(q.classes.size());
  for (size_t i = 0; i < q.classes.size(); ++i)
    w.samples[i] = mulaw_decode_class(q.classes[i], mu, q.quantization);
  return w;
}

}  // namespace sea
