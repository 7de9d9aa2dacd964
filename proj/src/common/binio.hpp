// common/binio.hpp
//
// Little-endian primitive readers/writers used by all binary formats
// (checkpoints, feature sidecars, raw waveforms).  Short reads and writes
// throw IoError.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace sea {

void write_bytes(std::ostream& os, const void* data, size_t n);
void write_u8(std::ostream& os, uint8_t v);
void write_u16(std::ostream& os, uint16_t v);
void write_u32(std::ostream& os, uint32_t v);
void write_u64(std::ostream& os, uint64_t v);
void write_i16(std::ostream& os, int16_t v);
void write_f64(std::ostream& os, double v);
void write_string(std::ostream& os, const std::string& s);  // u32 len + bytes

void read_bytes(std::istream& is, void* data, size_t n);
uint8_t read_u8(std::istream& is);
uint16_t read_u16(std::istream& is);
uint32_t read_u32(std::istream& is);
uint64_t read_u64(std::istream& is);
int16_t read_i16(std::istream& is);
double read_f64(std::istream& is);
std::string read_string(std::istream& is);

void expect_magic(std::istream& is, const char magic[4], const std::string& what);
void write_magic(std::ostream& os, const char magic[4]);

std::vector<uint8_t> read_file_bytes(const std::string& path);

}  // namespace sea
