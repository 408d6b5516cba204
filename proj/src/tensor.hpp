#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace advblur {

/// Dense planar array: `c` planes of `h` x `w` doubles.
///
/// Images are logically h x w x c; they are stored channel-planar so that
/// per-pixel maps (sigma, rho, flow components) and feature maps share one type.
struct Tensor {
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int channels, int height, int width, double fill = 0.0);

  std::size_t size() const noexcept { return data.size(); }
  std::size_t plane_size() const noexcept { return std::size_t(h) * std::size_t(w); }
  bool empty() const noexcept { return data.empty(); }

  double& at(int ch, int i, int j) noexcept { return data[(std::size_t(ch) * h + i) * w + j]; }
  const double& at(int ch, int i, int j) const noexcept { return data[(std::size_t(ch) * h + i) * w + j]; }

  std::span<double> plane(int ch) noexcept { return {data.data() + ch * plane_size(), plane_size()}; }
  std::span<const double> plane(int ch) const noexcept {
    return {data.data() + ch * plane_size(), plane_size()};
  }

  bool same_shape(const Tensor& other) const noexcept {
    return c == other.c && h == other.h && w == other.w;
  }
  std::string shape_string() const;
};

using Image = Tensor;

double max_abs_diff(const Tensor& a, const Tensor& b);
bool all_finite(std::span<const double> values);
void clamp_unit(Tensor& t);

}  // namespace advblur
