#pragma once

#include <string>

#include "odm/tensor.hpp"

namespace odm {

// MYT1 binary tensor dump:
//   magic "MYT1", u8 rank, rank × u32 little-endian dims,
//   row-major f32 little-endian payload.
void write_myt(const std::string& path, const Tensor& t);
Tensor read_myt(const std::string& path);

// Binary PPM (P6), 8-bit, returned as 3×H×W with values scaled to [0,1].
Tensor read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Tensor& img);  // values clamped to [0,1]

}  // namespace odm
