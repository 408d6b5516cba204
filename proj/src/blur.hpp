#pragma once

#include <functional>
#include <vector>

#include "tensor.hpp"

namespace advblur {

enum class Boundary { reflect, replicate, zero };

const char* to_string(Boundary b);
Boundary boundary_from_string(const std::string& name);

struct BlurSpec {
  int k = 9;
  Boundary boundary = Boundary::reflect;
  bool normalize = true;

  void validate() const;
};

/// Admissible range of the reciprocal parameterization rho = 1 / sigma.
struct RhoBounds {
  double rho_min = 0.1;
  double rho_max = 1000.0;

  double sigma_min() const { return 1.0 / rho_max; }
  double sigma_max() const { return 1.0 / rho_min; }
  void validate() const;
};

/// Per-pixel Gaussian standard deviations (single plane, strictly positive).
struct SigmaMap {
  Tensor sigma;

  static SigmaMap constant(int h, int w, double value);
  int h() const { return sigma.h; }
  int w() const { return sigma.w; }
  void validate() const;
};

/// Reciprocal of a SigmaMap, kept inside RhoBounds.
struct RhoMap {
  Tensor rho;

  static RhoMap from_sigma(const SigmaMap& s, const RhoBounds& bounds);
  SigmaMap to_sigma() const;
  void clamp(const RhoBounds& bounds);
};

/// k*k kernel in row-major order, offsets running from -(k-1)/2 to (k-1)/2.
std::vector<double> gaussian_kernel(double sigma, const BlurSpec& spec);

/// Blurs every channel of `image` with the per-pixel kernel G_{i,j} built from sigma(i,j).
Image blur_apply(const Image& image, const SigmaMap& sigma_map, const BlurSpec& spec);

struct BlurGradients {
  Tensor d_image;  // same shape as the input image
  Tensor d_sigma;  // single plane
};

/// Reverse-mode pass of blur_apply given dLoss/dOutput.
BlurGradients blur_backward(const Image& image, const SigmaMap& sigma_map, const BlurSpec& spec,
                            const Tensor& grad_out);

/// dL/drho from dL/dsigma using dsigma/drho = -1/rho^2 = -sigma^2.
Tensor sigma_grad_to_rho(const Tensor& d_sigma, const SigmaMap& sigma_map);

/// A scalar function of an image together with its gradient.
struct ScalarLoss {
  std::function<double(const Tensor&)> value;
  std::function<Tensor(const Tensor&)> gradient;
};

ScalarLoss mean_loss();
ScalarLoss sum_of_squares_loss();

enum class GradParam { sigma, rho };

struct GradCheckOptions {
  GradParam param = GradParam::sigma;
  double fd_step = 1e-3;
  int samples = 0;  // 0 checks every pixel
  unsigned long long seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_analytic = 0.0;
  int checked = 0;
};

/// Compares the analytic dL/dsigma (or dL/drho) against central differences.
/// Relative error per entry is |analytic - fd| / (|fd| + 1e-8).
GradCheckResult blur_gradient_check(const Image& image, const SigmaMap& sigma_map, const BlurSpec& spec,
                                    const ScalarLoss& loss, const GradCheckOptions& options = {});

}  // namespace advblur
