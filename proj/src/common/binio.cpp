// common/binio.cpp

#include "common/binio.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "common/error.hpp"

namespace sea {

void write_bytes(std::ostream& os, const void* data, size_t n) {
  os.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  check_io(os.good(), "write failed");
}

void write_u8(std::ostream& os, uint8_t v) { write_bytes(os, &v, 1); }

void write_u16(std::ostream& os, uint16_t v) {
  uint8_t b[2] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8)};
  write_bytes(os, b, 2);
}

void write_u32(std::ostream& os, uint32_t v) {
  uint8_t b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<uint8_t>(v >> (8 * i));
  write_bytes(os, b, 4);
}

void write_u64(std::ostream& os, uint64_t v) {
  uint8_t b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<uint8_t>(v >> (8 * i));
  write_bytes(os, b, 8);
}

void write_i16(std::ostream& os, int16_t v) {
  write_u16(os, static_cast<uint16_t>(v));
}

void write_f64(std::ostream& os, double v) {
  write_u64(os, std::bit_cast<uint64_t>(v));
}

void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<uint32_t>(s.size()));
  if (!s.empty()) write_bytes(os, s.data(), s.size());
}

void read_bytes(std::istream& is, void* data, size_t n) {
  is.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  check_io(static_cast<size_t>(is.gcount()) == n, "unexpected end of file");
}

uint8_t read_u8(std::istream& is) {
  uint8_t v;
  read_bytes(is, &v, 1);
  return v;
}

uint16_t read_u16(std::istream& is) {
  uint8_t b[2];
  read_bytes(is, b, 2);
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

uint32_t read_u32(std::istream& is) {
  uint8_t b[4];
  read_bytes(is, b, 4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

uint64_t read_u64(std::istream& is) {
  uint8_t b[8];
  read_bytes(is, b, 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

int16_t read_i16(std::istream& is) {
  return static_cast<int16_t>(read_u16(is));
}

double read_f64(std::istream& is) {
  return std::bit_cast<double>(read_u64(is));
}

std::string read_string(std::istream& is) {
  uint32_t n = read_u32(is);
  check_io(n <= (1u << 28), "string length implausibly large");
  std::string s(n, '\0');
  if (n) read_bytes(is, s.data(), n);
  return s;
}

void expect_magic(std::istream& is, const char magic[4], const std::string& what) {
  char b[4];
  read_bytes(is, b, 4);
  check_io(std::memcmp(b, magic, 4) == 0, "bad magic, not a " + what + " file");
}

void write_magic(std::ostream& os, const char magic[4]) {
  write_bytes(os, magic, 4);
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  check_io(f.good(), "cannot open " + path);
  f.seekg(0, std::ios::end);
  std::streamoff n = f.tellg();
  check_io(n >= 0, "cannot stat " + path);
  f.seekg(0);
  std::vector<uint8_t> buf(static_cast<size_t>(n));
  if (n) {
    f.read(reinterpret_cast<char*>(buf.data()), n);
    check_io(f.gcount() == n, "short read on " + path);
  }
  return buf;
}

}  // namespace sea
