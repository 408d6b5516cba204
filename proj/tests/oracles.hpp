#pragma once

// Deliberately slow reference implementations, written without reusing library code paths.

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

enum class Pad { reflect, replicate, zero };

struct Planes {
  int c = 0, h = 0, w = 0;
  std::vector<double> v;  // channel-major
  double get(int ch, int i, int j) const { return v[(std::size_t(ch) * h + i) * w + j]; }
};

/// Value of pixel (i, j) after extending the image by the padding rule.
inline double padded(const Planes& x, int ch, int i, int j, Pad pad) {
  auto fold = [&](int t, int n) {
    if (pad == Pad::replicate) return t < 0 ? 0 : (t >= n ? n - 1 : t);
    if (n == 1) return 0;
    // Mirror without repeating the edge sample; period 2(n-1).
    const int period = 2 * (n - 1);
    int m = ((t % period) + period) % period;
    return m < n ? m : period - m;
  };
  if (pad == Pad::zero && (i < 0 || i >= x.h || j < 0 || j >= x.w)) return 0.0;
  return x.get(ch, fold(i, x.h), fold(j, x.w));
}

/// Per-pixel Gaussian blur computed one output pixel at a time.
inline Planes naive_blur(const Planes& x, const std::vector<double>& sigma, int k, Pad pad, bool normalize) {
  const double pi = 3.14159265358979323846;
  const int r = k / 2;
  Planes y{x.c, x.h, x.w, std::vector<double>(x.v.size(), 0.0)};
  for (int i = 0; i < x.h; ++i)
    for (int j = 0; j < x.w; ++j) {
      const double s = sigma[std::size_t(i) * x.w + j];
      double total = 0.0;
      std::vector<double> wts;
      for (int u = -r; u <= r; ++u)
        for (int v = -r; v <= r; ++v) {
          const double g = std::exp(-(u * u + v * v) / (2 * s * s)) / (2 * pi * s * s);
          wts.push_back(g);
          total += g;
        }
      for (int ch = 0; ch < x.c; ++ch) {
        double acc = 0.0;
        int n = 0;
        for (int u = -r; u <= r; ++u)
          for (int v = -r; v <= r; ++v) acc += wts[n++] * padded(x, ch, i + u, j + v, pad);
        y.v[(std::size_t(ch) * x.h + i) * x.w + j] = normalize ? acc / total : acc;
      }
    }
  return y;
}

/// AUC as the fraction of positive/negative pairs ranked correctly, ties counting 1/2.
inline double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0;
  long pairs = 0;
  for (std::size_t a = 0; a < s.size(); ++a)
    for (std::size_t b = 0; b < s.size(); ++b)
      if (y[a] == 1 && y[b] == 0) {
        ++pairs;
        wins += s[a] > s[b] ? 1.0 : (s[a] == s[b] ? 0.5 : 0.0);
      }
  return wins / double(pairs);
}

/// Mean squared response of the 3x3 discrete Laplacian, interior pixels, all channels.
inline double hf_energy(const Planes& x) {
  double e = 0.0;
  long n = 0;
  for (int ch = 0; ch < x.c; ++ch)
    for (int i = 1; i + 1 < x.h; ++i)
      for (int j = 1; j + 1 < x.w; ++j) {
        const double l = 4 * x.get(ch, i, j) - x.get(ch, i - 1, j) - x.get(ch, i + 1, j) - x.get(ch, i, j - 1) -
                         x.get(ch, i, j + 1);
        e += l * l;
        ++n;
      }
  return e / double(n);
}

/// Mean energy of the high-frequency (u + v >= 8) orthonormal DCT-II coefficients of every full 8x8 block.
inline double block_dct_hf_energy(const Planes& x) {
  const double pi = std::acos(-1.0);
  double e = 0.0;
  long blocks = 0;
  for (int ch = 0; ch < x.c; ++ch)
    for (int bi = 0; bi + 8 <= x.h; bi += 8)
      for (int bj = 0; bj + 8 <= x.w; bj += 8) {
        for (int u = 0; u < 8; ++u)
          for (int v = 0; v < 8; ++v) {
            if (u + v < 8) continue;
            double c = 0.0;
            for (int i = 0; i < 8; ++i)
              for (int j = 0; j < 8; ++j)
                c += x.get(ch, bi + i, bj + j) * std::cos((2 * i + 1) * u * pi / 16) * std::cos((2 * j + 1) * v * pi / 16);
            c *= (u == 0 ? std::sqrt(0.125) : 0.5) * (v == 0 ? std::sqrt(0.125) : 0.5);
            e += c * c;
          }
        ++blocks;
      }
  return e / double(blocks);
}

/// Cross-entropy of two logits and its derivative, written out from the softmax definition.
inline double softmax_xent(double z0, double z1, int label) {
  const double p1 = 1.0 / (1.0 + std::exp(z0 - z1));
  return label == 1 ? -std::log(p1) : -std::log(1.0 - p1);
}

}  // namespace oracle
