// audio/wavio.cpp

#include "audio/wavio.hpp"

#include <cmath>
#include <fstream>

#include "common/binio.hpp"
#include "common/error.hpp"

namespace sea {

void write_wav(const std::string& path, const Waveform& w) {
  check_arg(w.sample_rate > 0, "write_wav: bad sample rate");
  std::ofstream f(path, std::ios::binary);
  check_io(f.good(), "cannot open " + path + " for writing");

  uint32_t n = static_cast<uint32_t>(w.samples.size());
  uint32_t data_bytes = n * 2;
  write_magic(f, "RIFF");
  write_u32(f, 36 + data_bytes);
  write_magic(f, "WAVE");
  write_magic(f, "fmt ");
  write_u32(f, 16);
  write_u16(f, 1);  // PCM
  write_u16(f, 1);  // mono
  write_u32(f, static_cast<uint32_t>(w.sample_rate));
  write_u32(f, static_cast<uint32_t>(w.sample_rate) * 2);
  write_u16(f, 2);   // block align
  write_u16(f, 16);  // bits per sample
  write_magic(f, "data");
  write_u32(f, data_bytes);
  for (double x : w.samples) {
    double c = x < -1.0 ? -1.0 : (x > 1.0 ? 1.0 : x);
    write_i16(f, static_cast<int16_t>(std::lrint(c * 32767.0)));
  }
  f.flush();
  check_io(f.good(), "write failed on " + path);
}

Waveform read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  check_io(f.good(), "cannot open " + path);
  expect_magic(f, "RIFF", "RIFF");
  read_u32(f);  // riff size, unused
  expect_magic(f, "WAVE", "WAVE");

  Waveform w;
  bool have_fmt = false;
  while (true) {
    char id[4];
    f.read(id, 4);
    if (f.gcount() != 4) break;
    uint32_t size = read_u32(f);
    if (std::string(id, 4) == "fmt ") {
      check_io(size >= 16, "wav: short fmt chunk");
      uint16_t fmt = read_u16(f);
      uint16_t channels = read_u16(f);
      uint32_t rate = read_u32(f);
      read_u32(f);  // byte rate
      read_u16(f);  // block align
      uint16_t bits = read_u16(f);
      check_io(fmt == 1, "wav: only PCM supported");
      check_io(channels == 1, "wav: only mono supported");
      check_io(bits == 16, "wav: only 16-bit supported");
      w.sample_rate = static_cast<int>(rate);
      if (size > 16) f.seekg(size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::string(id, 4) == "data") {
      check_io(have_fmt, "wav: data chunk before fmt");
      check_io(size % 2 == 0, "wav: odd data size");
      size_t n = size / 2;
      w.samples.resize(n);
      for (size_t i = 0; i < n; ++i)
        w.samples[i] = static_cast<double>(read_i16(f)) / 32768.0;
      return w;
    } else {
      f.seekg(size + (size & 1), std::ios::cur);
    }
    check_io(f.good(), "wav: truncated file");
  }
  throw IoError("wav: no data chunk in " + path);
}

void write_raw_f64(const std::string& path, const Waveform& w) {
  std::ofstream f(path, std::ios::binary);
  check_io(f.good(), "cannot open " + path + " for writing");
  write_magic(f, "SEAR");
  write_u32(f, 1);
  write_u32(f, static_cast<uint32_t>(w.sample_rate));
  write_u64(f, w.samples.size());
  for (double x : w.samples) write_f64(f, x);
  f.flush();
  check_io(f.good(), "write failed on " + path);
}

Waveform read_raw_f64(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  check_io(f.good(), "cannot open " + path);
  expect_magic(f, "SEAR", "raw waveform");
  uint32_t version = read_u32(f);
  check_io(version == 1, "raw waveform: unsupported version");
  Waveform w;
  w.sample_rate = static_cast<int>(read_u32(f));
  uint64_t n = read_u64(f);
  check_io(n <= (1ull << 32), "raw waveform: implausible sample count");
  w.samples.resize(static_cast<size_t>(n));
  for (auto& x : w.samples) x = read_f64(f);
  return w;
}

}  // namespace sea
