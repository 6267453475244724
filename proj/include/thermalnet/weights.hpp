#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "thermalnet/model.hpp"

namespace thermalnet {

enum class WeightScope { kAll, kBase };

struct LoadReport {
    std::vector<std::string> loaded;
    std::vector<std::string> left_at_init;  // model tensors absent from the file
};

/// Binary weight file, layout:
///   magic "TMCW", u16 version, u32 tensor count;
///   per tensor: u16 name length + UTF-8 name, u8 rank, u32 dims,
///   little-endian f32 element data, row-major;
///   trailing u32 CRC32 (IEEE) over all preceding bytes.
/// Values are stored as f32 and widened to f64 on load.
void save_weights(Model& m, const std::string& path, WeightScope scope = WeightScope::kAll);

/// Loads tensors by name. Every file tensor must exist in the model with a
/// matching shape (a file holding a strict subset of the model is fine and
/// the untouched tensors are reported). Any mismatch leaves the model
/// unmodified and throws.
LoadReport load_weights(Model& m, const std::string& path);

uint32_t crc32_ieee(const uint8_t* data, size_t len, uint32_t seed = 0);

} // namespace thermalnet
