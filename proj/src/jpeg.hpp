#pragma once

#include <array>

#include "tensor.hpp"

namespace advblur {

/// Baseline luminance quantization table (row-major 8x8), scaled by quality 1..100.
std::array<int, 64> jpeg_quant_table(int quality);

/// Lossy round trip through 8x8 block DCT quantization, applied per channel.
/// Output is rounded to the 8-bit grid and clamped to [0,1].
Image jpeg_simulate(const Image& image, int quality);

}  // namespace advblur
