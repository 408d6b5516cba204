#include "jpeg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "errors.hpp"

namespace advblur {

namespace {

constexpr std::array<int, 64> kLuminance = {
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99};

// cos((2x+1) u pi / 16) scaled by the orthonormal factor for u.
const std::array<double, 64>& dct_basis() {
  static const std::array<double, 64> basis = [] {
    std::array<double, 64> b{};
    for (int u = 0; u < 8; ++u) {
      const double cu = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int x = 0; x < 8; ++x) b[u * 8 + x] = cu * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
    }
    return b;
  }();
  return basis;
}

}  // namespace

std::array<int, 64> jpeg_quant_table(int quality) {
  require(quality >= 1 && quality <= 100, ErrorKind::validation,
          "jpeg quality must be in [1,100], got " + std::to_string(quality));
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<int, 64> q{};
  for (int i = 0; i < 64; ++i) q[i] = std::clamp((kLuminance[i] * scale + 50) / 100, 1, 255);
  return q;
}

Image jpeg_simulate(const Image& image, int quality) {
  const auto table = jpeg_quant_table(quality);
  const auto& basis = dct_basis();
  Image out(image.c, image.h, image.w);
  std::array<double, 64> block{}, tmp{}, coef{};
  for (int ch = 0; ch < image.c; ++ch)
    for (int bi = 0; bi < image.h; bi += 8)
      for (int bj = 0; bj < image.w; bj += 8) {
        // Partial edge blocks are completed by replicating the last row/column.
        for (int x = 0; x < 8; ++x)
          for (int y = 0; y < 8; ++y) {
            const int i = std::min(bi + x, image.h - 1), j = std::min(bj + y, image.w - 1);
            block[x * 8 + y] = image.at(ch, i, j) * 255.0 - 128.0;
          }
        // Separable forward DCT: rows then columns.
        for (int x = 0; x < 8; ++x)
          for (int v = 0; v < 8; ++v) {
            double s = 0.0;
            for (int y = 0; y < 8; ++y) s += basis[v * 8 + y] * block[x * 8 + y];
            tmp[x * 8 + v] = s;
          }
        for (int u = 0; u < 8; ++u)
          for (int v = 0; v < 8; ++v) {
            double s = 0.0;
            for (int x = 0; x < 8; ++x) s += basis[u * 8 + x] * tmp[x * 8 + v];
            coef[u * 8 + v] = std::round(s / table[u * 8 + v]) * table[u * 8 + v];
          }
        for (int x = 0; x < 8; ++x)
          for (int v = 0; v < 8; ++v) {
            double s = 0.0;
            for (int u = 0; u < 8; ++u) s += basis[u * 8 + x] * coef[u * 8 + v];
            tmp[x * 8 + v] = s;
          }
        for (int x = 0; x < 8; ++x)
          for (int y = 0; y < 8; ++y) {
            double s = 0.0;
            for (int v = 0; v < 8; ++v) s += basis[v * 8 + y] * tmp[x * 8 + v];
            const int i = bi + x, j = bj + y;
            if (i < image.h && j < image.w)
              out.at(ch, i, j) = std::clamp(std::round(s + 128.0), 0.0, 255.0) / 255.0;
          }
      }
  return out;
}

}  // namespace advblur
