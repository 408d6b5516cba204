#include "blur.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "errors.hpp"

namespace advblur {

const char* to_string(Boundary b) {
  switch (b) {
    case Boundary::reflect: return "reflect";
    case Boundary::replicate: return "replicate";
    case Boundary::zero: return "zero";
  }
  return "reflect";
}

Boundary boundary_from_string(const std::string& name) {
  if (name == "reflect") return Boundary::reflect;
  if (name == "replicate") return Boundary::replicate;
  if (name == "zero") return Boundary::zero;
  fail(ErrorKind::spec, "unknown boundary mode '" + name + "'");
}

void BlurSpec::validate() const {
  require(k >= 1 && k % 2 == 1, ErrorKind::spec, "kernel size must be odd and >= 1, got " + std::to_string(k));
}

void RhoBounds::validate() const {
  require(rho_min > 0.0 && rho_max > rho_min && std::isfinite(rho_max), ErrorKind::validation,
          "rho bounds must satisfy 0 < rho_min < rho_max");
}

SigmaMap SigmaMap::constant(int h, int w, double value) {
  require(value > 0.0, ErrorKind::domain, "sigma must be positive");
  return SigmaMap{Tensor(1, h, w, value)};
}

void SigmaMap::validate() const {
  require(sigma.c == 1, ErrorKind::shape, "sigma map must have a single plane");
  for (double s : sigma.data)
    require(s > 0.0 && std::isfinite(s), ErrorKind::domain, "sigma map entries must be finite and > 0");
}

RhoMap RhoMap::from_sigma(const SigmaMap& s, const RhoBounds& bounds) {
  RhoMap r{s.sigma};
  for (double& v : r.rho.data) v = 1.0 / v;
  r.clamp(bounds);
  return r;
}

SigmaMap RhoMap::to_sigma() const {
  SigmaMap s{rho};
  for (double& v : s.sigma.data) v = 1.0 / v;
  return s;
}

void RhoMap::clamp(const RhoBounds& bounds) {
  for (double& v : rho.data) v = std::clamp(v, bounds.rho_min, bounds.rho_max);
}

std::vector<double> gaussian_kernel(double sigma, const BlurSpec& spec) {
  spec.validate();
  require(sigma > 0.0 && std::isfinite(sigma), ErrorKind::domain, "sigma must be positive and finite");
  const int r = (spec.k - 1) / 2;
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  const double scale = 1.0 / (2.0 * std::numbers::pi * sigma * sigma);
  std::vector<double> kernel(std::size_t(spec.k) * spec.k);
  double total = 0.0;
  for (int u = -r; u <= r; ++u)
    for (int v = -r; v <= r; ++v) {
      const double g = scale * std::exp(-double(u * u + v * v) * inv2s2);
      kernel[std::size_t(u + r) * spec.k + (v + r)] = g;
      total += g;
    }
  if (spec.normalize)
    for (double& g : kernel) g /= total;
  return kernel;
}

namespace {

int map_index(int i, int n, Boundary b) {
  if (i >= 0 && i < n) return i;
  switch (b) {
    case Boundary::reflect:
      if (n == 1) return 0;
      while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
      return i;
    case Boundary::replicate: return std::clamp(i, 0, n - 1);
    case Boundary::zero: return -1;
  }
  return -1;
}

// Channel planes extended by `r` on each side according to the boundary rule.
Tensor pad(const Tensor& x, int r, Boundary b) {
  Tensor p(x.c, x.h + 2 * r, x.w + 2 * r);
  for (int ch = 0; ch < x.c; ++ch)
    for (int i = 0; i < p.h; ++i) {
      const int si = map_index(i - r, x.h, b);
      for (int j = 0; j < p.w; ++j) {
        const int sj = map_index(j - r, x.w, b);
        p.at(ch, i, j) = (si < 0 || sj < 0) ? 0.0 : x.at(ch, si, sj);
      }
    }
  return p;
}

// Folds a gradient w.r.t. the padded planes back onto the original pixels.
Tensor unpad(const Tensor& dp, int r, int h, int w, Boundary b) {
  Tensor dx(dp.c, h, w);
  for (int ch = 0; ch < dp.c; ++ch)
    for (int i = 0; i < dp.h; ++i) {
      const int si = map_index(i - r, h, b);
      if (si < 0) continue;
      for (int j = 0; j < dp.w; ++j) {
        const int sj = map_index(j - r, w, b);
        if (sj < 0) continue;
        dx.at(ch, si, sj) += dp.at(ch, i, j);
      }
    }
  return dx;
}

// Per-pixel weights for every kernel offset, evaluated once per distinct u^2+v^2.
struct PixelWeights {
  int k = 0;
  std::vector<int> offset_class;         // k*k entries
  std::vector<double> class_r2;          // distinct u^2+v^2 values
  std::vector<std::vector<double>> w;    // per class: h*w weights
  std::vector<double> mean_r2;           // per pixel, sum_uv w * r2 (normalized mode)
};

PixelWeights pixel_weights(const SigmaMap& sm, const BlurSpec& spec) {
  PixelWeights pw;
  pw.k = spec.k;
  const int r = (spec.k - 1) / 2;
  std::map<int, int> classes;
  pw.offset_class.resize(std::size_t(spec.k) * spec.k);
  for (int u = -r; u <= r; ++u)
    for (int v = -r; v <= r; ++v) {
      const int d = u * u + v * v;
      auto [it, inserted] = classes.emplace(d, int(classes.size()));
      if (inserted) pw.class_r2.push_back(double(d));
      pw.offset_class[std::size_t(u + r) * spec.k + (v + r)] = it->second;
    }
  std::vector<int> multiplicity(pw.class_r2.size(), 0);
  for (int c : pw.offset_class) ++multiplicity[c];

  const std::size_t n = sm.sigma.size();
  std::vector<double> inv2s2(n);
  for (std::size_t p = 0; p < n; ++p) inv2s2[p] = 1.0 / (2.0 * sm.sigma.data[p] * sm.sigma.data[p]);

  pw.w.assign(pw.class_r2.size(), std::vector<double>(n));
  for (std::size_t c = 0; c < pw.class_r2.size(); ++c) {
    const double d = pw.class_r2[c];
    auto& plane = pw.w[c];
    for (std::size_t p = 0; p < n; ++p) plane[p] = std::exp(-d * inv2s2[p]);
  }
  if (spec.normalize) {
    std::vector<double> total(n, 0.0);
    for (std::size_t c = 0; c < pw.class_r2.size(); ++c)
      for (std::size_t p = 0; p < n; ++p) total[p] += multiplicity[c] * pw.w[c][p];
    pw.mean_r2.assign(n, 0.0);
    for (std::size_t c = 0; c < pw.class_r2.size(); ++c)
      for (std::size_t p = 0; p < n; ++p) {
        pw.w[c][p] /= total[p];
        pw.mean_r2[p] += multiplicity[c] * pw.w[c][p] * pw.class_r2[c];
      }
  } else {
    for (std::size_t p = 0; p < n; ++p) {
      const double s = sm.sigma.data[p];
      const double scale = 1.0 / (2.0 * std::numbers::pi * s * s);
      for (auto& plane : pw.w) plane[p] *= scale;
    }
  }
  return pw;
}

void check_inputs(const Image& image, const SigmaMap& sm, const BlurSpec& spec) {
  spec.validate();
  require(image.c >= 1, ErrorKind::shape, "image has no channels");
  require(sm.sigma.c == 1 && sm.sigma.h == image.h && sm.sigma.w == image.w, ErrorKind::shape,
          "sigma map " + sm.sigma.shape_string() + " does not match image " + image.shape_string());
  require(image.h >= spec.k && image.w >= spec.k, ErrorKind::shape,
          "image " + image.shape_string() + " smaller than kernel size " + std::to_string(spec.k));
  sm.validate();
}

}  // namespace

Image blur_apply(const Image& image, const SigmaMap& sigma_map, const BlurSpec& spec) {
  check_inputs(image, sigma_map, spec);
  const int r = (spec.k - 1) / 2;
  const Tensor padded = pad(image, r, spec.boundary);
  const PixelWeights pw = pixel_weights(sigma_map, spec);
  const int h = image.h, w = image.w;
  Image out(image.c, h, w);
  for (int ch = 0; ch < image.c; ++ch) {
    double* dst = out.plane(ch).data();
    for (int u = 0; u < spec.k; ++u)
      for (int v = 0; v < spec.k; ++v) {
        const double* weights = pw.w[pw.offset_class[std::size_t(u) * spec.k + v]].data();
        for (int i = 0; i < h; ++i) {
          const double* src = &padded.at(ch, i + u, v);
          const double* wrow = weights + std::size_t(i) * w;
          double* orow = dst + std::size_t(i) * w;
          for (int j = 0; j < w; ++j) orow[j] += wrow[j] * src[j];
        }
      }
  }
  return out;
}

BlurGradients blur_backward(const Image& image, const SigmaMap& sigma_map, const BlurSpec& spec,
                            const Tensor& grad_out) {
  check_inputs(image, sigma_map, spec);
  require(grad_out.same_shape(image), ErrorKind::shape, "blur gradient shape mismatch");
  const int r = (spec.k - 1) / 2;
  const int h = image.h, w = image.w;
  const Tensor padded = pad(image, r, spec.boundary);
  const PixelWeights pw = pixel_weights(sigma_map, spec);

  Tensor d_padded(image.c, padded.h, padded.w);
  // Accumulates sum_c g(c,i,j) * sum_uv w_uv(i,j) * coef_uv(i,j) * x_nb; coef differs per mode.
  std::vector<double> weighted_r2(std::size_t(h) * w, 0.0);   // sum_c g * sum_uv w r2 x
  std::vector<double> weighted_sum(std::size_t(h) * w, 0.0);  // sum_c g * sum_uv w x

  for (int ch = 0; ch < image.c; ++ch) {
    const double* g = grad_out.plane(ch).data();
    for (int u = 0; u < spec.k; ++u)
      for (int v = 0; v < spec.k; ++v) {
        const int cls = pw.offset_class[std::size_t(u) * spec.k + v];
        const double r2 = pw.class_r2[cls];
        const double* weights = pw.w[cls].data();
        for (int i = 0; i < h; ++i) {
          const double* src = &padded.at(ch, i + u, v);
          double* dsrc = &d_padded.at(ch, i + u, v);
          const std::size_t row = std::size_t(i) * w;
          for (int j = 0; j < w; ++j) {
            const double wg = weights[row + j] * g[row + j];
            dsrc[j] += wg;
            weighted_sum[row + j] += wg * src[j];
            weighted_r2[row + j] += wg * r2 * src[j];
          }
        }
      }
  }

  BlurGradients grads;
  grads.d_image = unpad(d_padded, r, h, w, spec.boundary);
  grads.d_sigma = Tensor(1, h, w);
  for (std::size_t p = 0; p < weighted_sum.size(); ++p) {
    const double s = sigma_map.sigma.data[p];
    const double s3 = s * s * s;
    if (spec.normalize) {
      // dw/dsigma = w (r2 - mean_r2) / sigma^3
      grads.d_sigma.data[p] = (weighted_r2[p] - pw.mean_r2[p] * weighted_sum[p]) / s3;
    } else {
      // dw/dsigma = w (r2 / sigma^3 - 2 / sigma)
      grads.d_sigma.data[p] = weighted_r2[p] / s3 - 2.0 * weighted_sum[p] / s;
    }
  }
  return grads;
}

Tensor sigma_grad_to_rho(const Tensor& d_sigma, const SigmaMap& sigma_map) {
  require(d_sigma.same_shape(sigma_map.sigma), ErrorKind::shape, "gradient/sigma shape mismatch");
  Tensor d_rho = d_sigma;
  for (std::size_t p = 0; p < d_rho.size(); ++p) {
    const double s = sigma_map.sigma.data[p];
    d_rho.data[p] *= -s * s;
  }
  return d_rho;
}

ScalarLoss mean_loss() {
  return ScalarLoss{
      [](const Tensor& x) {
        double s = 0.0;
        for (double v : x.data) s += v;
        return s / double(x.size());
      },
      [](const Tensor& x) {
        Tensor g = x;
        std::fill(g.data.begin(), g.data.end(), 1.0 / double(x.size()));
        return g;
      }};
}

ScalarLoss sum_of_squares_loss() {
  return ScalarLoss{
      [](const Tensor& x) {
        double s = 0.0;
        for (double v : x.data) s += v * v;
        return s;
      },
      [](const Tensor& x) {
        Tensor g = x;
        for (double& v : g.data) v *= 2.0;
        return g;
      }};
}

GradCheckResult blur_gradient_check(const Image& image, const SigmaMap& sigma_map, const BlurSpec& spec,
                                    const ScalarLoss& loss, const GradCheckOptions& options) {
  require(options.fd_step > 0.0, ErrorKind::validation, "finite-difference step must be positive");
  const Image blurred = blur_apply(image, sigma_map, spec);
  const BlurGradients grads = blur_backward(image, sigma_map, spec, loss.gradient(blurred));
  const Tensor analytic =
      options.param == GradParam::sigma ? grads.d_sigma : sigma_grad_to_rho(grads.d_sigma, sigma_map);

  std::vector<std::size_t> entries(sigma_map.sigma.size());
  for (std::size_t p = 0; p < entries.size(); ++p) entries[p] = p;
  if (options.samples > 0 && std::size_t(options.samples) < entries.size()) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(entries.begin(), entries.end(), rng);
    entries.resize(std::size_t(options.samples));
  }

  auto evaluate = [&](std::size_t p, double delta) {
    SigmaMap perturbed = sigma_map;
    if (options.param == GradParam::sigma) {
      perturbed.sigma.data[p] += delta;
    } else {
      perturbed.sigma.data[p] = 1.0 / (1.0 / sigma_map.sigma.data[p] + delta);
    }
    return loss.value(blur_apply(image, perturbed, spec));
  };

  GradCheckResult result;
  for (std::size_t p : entries) {
    const double fd = (evaluate(p, options.fd_step) - evaluate(p, -options.fd_step)) / (2.0 * options.fd_step);
    const double a = analytic.data[p];
    result.max_rel_error = std::max(result.max_rel_error, std::abs(a - fd) / (std::abs(fd) + 1e-8));
    result.max_abs_analytic = std::max(result.max_abs_analytic, std::abs(a));
    ++result.checked;
  }
  return result;
}

}  // namespace advblur
