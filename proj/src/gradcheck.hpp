#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blur.hpp"
#include "detector.hpp"
#include "json.hpp"

namespace advblur {

struct GradCheckCase {
  std::string name;
  double rel_error = 0.0;
  double tolerance = 0.0;
  int checked = 0;
  int skipped = 0;  // coordinates whose step straddles an activation kink

  bool pass() const { return checked > 0 && rel_error < tolerance && 4 * skipped <= checked + skipped; }
  nlohmann::ordered_json to_json() const;
};

/// Blur-only cases: random image, sigma map, kernel, boundary and loss per case; checks sigma and rho.
std::vector<GradCheckCase> blur_gradient_cases(int cases, std::uint64_t seed, double tolerance = 1e-4);

/// Norm-wise relative error of dL/dsigma (or dL/drho) of the detector loss on blur(x, sigma).
GradCheckCase detector_blur_path_check(const Detector& model, const Image& image, int label, const SigmaMap& sigma,
                                       const BlurSpec& spec, GradParam param, int samples, std::uint64_t seed,
                                       double tolerance = 1e-3);

/// Norm-wise relative error of sampled parameter gradients of the detector loss.
GradCheckCase detector_param_check(const Detector& model, const Image& image, int label, int samples,
                                   std::uint64_t seed, double tolerance = 1e-3);

/// Blur cases plus detector-path cases on a freshly initialised small detector.
std::vector<GradCheckCase> run_grad_checks(int cases, std::uint64_t seed);

}  // namespace advblur
