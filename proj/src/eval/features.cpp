#include "eval/features.hpp"

#include <cmath>

#include "common/error.hpp"

namespace sea {

std::vector<double> band_frequencies(const SpectralConfig& cfg, int sample_rate) {
  check_arg(cfg.bands >= 2, "spectral config needs at least 2 bands");
  check_arg(cfg.freq_lo > 0.0 && cfg.freq_hi > cfg.freq_lo, "bad spectral band range");
  check_arg(cfg.freq_hi < 0.5 * sample_rate, "spectral bands exceed Nyquist");
  std::vector<double> freqs(cfg.bands);
  const double ratio = cfg.freq_hi / cfg.freq_lo;
  for (int b = 0; b < cfg.bands; ++b) {
    freqs[b] = cfg.freq_lo * std::pow(ratio, double(b) / double(cfg.bands - 1));
  }
  return freqs;
}

Tensor spectral_frames(const Waveform& wave, const SpectralConfig& cfg) {
  const int W = cfg.window;
  const int T = int(wave.samples.size());
  check_arg(W > 0 && cfg.hop > 0, "bad spectral window/hop");
  check_arg(T >= W, "waveform shorter than one analysis window");
  const int F = (T - W) / cfg.hop + 1;

  const auto freqs = band_frequencies(cfg, wave.sample_rate);
  // Windowed basis, one cos/sin row per band.
  std::vector<double> hann(W);
  for (int i = 0; i < W; ++i) {
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / (W - 1));
  }
  std::vector<double> basis_c(size_t(cfg.bands) * W), basis_s(size_t(cfg.bands) * W);
  for (int b = 0; b < cfg.bands; ++b) {
    const double w = 2.0 * M_PI * freqs[b] / wave.sample_rate;
    for (int i = 0; i < W; ++i) {
      basis_c[size_t(b) * W + i] = hann[i] * std::cos(w * i);
      basis_s[size_t(b) * W + i] = hann[i] * std::sin(w * i);
    }
  }

  Tensor out({cfg.bands, F});
  for (int f = 0; f < F; ++f) {
    const double* x = wave.samples.data() + size_t(f) * cfg.hop;
    for (int b = 0; b < cfg.bands; ++b) {
      const double* bc = basis_c.data() + size_t(b) * W;
      const double* bs = basis_s.data() + size_t(b) * W;
      double re = 0.0, im = 0.0;
      for (int i = 0; i < W; ++i) {
        re += bc[i] * x[i];
        im += bs[i] * x[i];
      }
      out.v[size_t(b) * F + f] = std::log(1e-9 + re * re + im * im);
    }
  }
  return out;
}

}  // namespace sea
