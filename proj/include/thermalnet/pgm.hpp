#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "thermalnet/image.hpp"

namespace thermalnet {

/// Decodes binary PGM ("P5", maxval <= 65535). Intensities are divided by
/// maxval into [0,1]; two-byte samples are big-endian per the Netpbm spec.
Image decode_pgm(const std::vector<uint8_t>& bytes);

/// Encodes to binary PGM, quantizing with round(v * maxval).
std::vector<uint8_t> encode_pgm(const Image& img, int maxval = 255);

Image read_pgm_file(const std::string& path);
void write_pgm_file(const Image& img, const std::string& path, int maxval = 255);

} // namespace thermalnet
