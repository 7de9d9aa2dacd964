// common/checksum.hpp
//
// CRC-32 (the zlib polynomial) for artifact integrity records in corpus
// and run manifests.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sea {

uint32_t crc32(const void* data, size_t n, uint32_t seed = 0);
uint32_t crc32_file(const std::string& path);
std::string crc32_hex(uint32_t v);

}  // namespace sea
