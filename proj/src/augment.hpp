#pragma once

#include <random>
#include <string>

#include "tensor.hpp"

namespace advblur {

enum class AugmentKind { noise, blur, jpeg, combined };

AugmentKind augment_kind_from_string(const std::string& s);
const char* to_string(AugmentKind k);

/// Traditional augmentation settings; variances are on the 0..255 pixel scale.
struct AugmentParams {
  double noise_p = 0.5;
  double noise_mean = 0.0;
  double noise_var_max = 30.0;
  double blur_p = 0.5;
  int blur_kernel = 9;
  double blur_var_max = 30.0;
  double jpeg_p = 0.5;
  int jpeg_quality_min = 60;
  int jpeg_quality_max = 100;
};

Image add_gaussian_noise(const Image& image, double mean, double variance_255, std::mt19937_64& rng);
Image gaussian_blur(const Image& image, double variance, int kernel);

/// Returns an augmented copy; the input is never modified.
Image augment_traditional(const Image& image, AugmentKind kind, std::mt19937_64& rng, const AugmentParams& params = {});

}  // namespace advblur
