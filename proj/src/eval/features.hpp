#pragma once

#include "audio/mulaw.hpp"
#include "diff/tensor.hpp"

namespace sea {

// Frame-rate spectral features for the verification front end. Each frame is
// a Hann-windowed slice of the waveform projected onto a geometric grid of
// band frequencies (Goertzel-style single-bin magnitudes), log-compressed.
struct SpectralConfig {
  int window = 256;
  int hop = 64;
  int bands = 24;
  double freq_lo = 60.0;
  double freq_hi = 1900.0;
};

// Returns [bands, frames]. Requires wave length >= window.
Tensor spectral_frames(const Waveform& wave, const SpectralConfig& cfg);

// Band center frequencies in Hz (geometric spacing, size cfg.bands).
std::vector<double> band_frequencies(const SpectralConfig& cfg, int sample_rate);

}  // namespace sea
