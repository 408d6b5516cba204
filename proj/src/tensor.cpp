#include "tensor.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"

namespace advblur {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::domain: return "domain";
    case ErrorKind::shape: return "shape";
    case ErrorKind::spec: return "spec";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::io: return "io";
    case ErrorKind::config: return "config";
    case ErrorKind::undefined_metric: return "undefined-metric";
  }
  return "unknown";
}

Tensor::Tensor(int channels, int height, int width, double fill)
    : c(channels), h(height), w(width) {
  require(channels >= 0 && height >= 0 && width >= 0, ErrorKind::shape, "negative tensor extent");
  data.assign(std::size_t(channels) * height * width, fill);
}

std::string Tensor::shape_string() const {
  return std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require(a.same_shape(b), ErrorKind::shape,
          "cannot compare " + a.shape_string() + " with " + b.shape_string());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

void clamp_unit(Tensor& t) {
  for (double& v : t.data) v = std::clamp(v, 0.0, 1.0);
}

}  // namespace advblur
