// audio/wavio.hpp
//
// Waveform file IO.  Two formats:
//   - mono 16-bit PCM RIFF/WAVE, for anything a person might listen to;
//   - a raw float64 container ("SEAR"), lossless, for fixtures and for
//     byte-exact determinism comparisons.

#pragma once

#include <string>

#include "audio/mulaw.hpp"

namespace sea {

void write_wav(const std::string& path, const Waveform& w);
Waveform read_wav(const std::string& path);

void write_raw_f64(const std::string& path, const Waveform& w);
Waveform read_raw_f64(const std::string& path);

}  // namespace sea
