#include "augment.hpp"

#include <algorithm>
#include <cmath>

#include "blur.hpp"
#include "errors.hpp"
#include "jpeg.hpp"

namespace advblur {

AugmentKind augment_kind_from_string(const std::string& s) {
  if (s == "noise") return AugmentKind::noise;
  if (s == "blur") return AugmentKind::blur;
  if (s == "jpeg") return AugmentKind::jpeg;
  if (s == "combined") return AugmentKind::combined;
  fail(ErrorKind::validation, "unknown augmentation kind '" + s + "'");
}

const char* to_string(AugmentKind k) {
  switch (k) {
    case AugmentKind::noise: return "noise";
    case AugmentKind::blur: return "blur";
    case AugmentKind::jpeg: return "jpeg";
    case AugmentKind::combined: return "combined";
  }
  return "noise";
}

Image add_gaussian_noise(const Image& image, double mean, double variance_255, std::mt19937_64& rng) {
  require(variance_255 >= 0.0, ErrorKind::validation, "noise variance must be >= 0");
  if (variance_255 == 0.0 && mean == 0.0) return image;
  std::normal_distribution<double> dist(mean / 255.0, std::sqrt(variance_255) / 255.0);
  Image out = image;
  for (double& v : out.data) v = std::clamp(v + dist(rng), 0.0, 1.0);
  return out;
}

Image gaussian_blur(const Image& image, double variance, int kernel) {
  require(variance >= 0.0, ErrorKind::validation, "blur variance must be >= 0");
  if (variance == 0.0) return image;
  BlurSpec spec;
  spec.k = kernel;
  return blur_apply(image, SigmaMap::constant(image.h, image.w, std::sqrt(variance)), spec);
}

namespace {

bool coin(double p, std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

Image apply_noise(const Image& x, std::mt19937_64& rng, const AugmentParams& p) {
  const bool on = coin(p.noise_p, rng);
  const double var = std::uniform_real_distribution<double>(0.0, p.noise_var_max)(rng);
  return on ? add_gaussian_noise(x, p.noise_mean, var, rng) : x;
}

Image apply_blur(const Image& x, std::mt19937_64& rng, const AugmentParams& p) {
  const bool on = coin(p.blur_p, rng);
  const double var = std::uniform_real_distribution<double>(0.0, p.blur_var_max)(rng);
  return on ? gaussian_blur(x, var, p.blur_kernel) : x;
}

Image apply_jpeg(const Image& x, std::mt19937_64& rng, const AugmentParams& p) {
  const bool on = coin(p.jpeg_p, rng);
  const int q = std::uniform_int_distribution<int>(p.jpeg_quality_min, p.jpeg_quality_max)(rng);
  return on ? jpeg_simulate(x, q) : x;
}

}  // namespace

Image augment_traditional(const Image& image, AugmentKind kind, std::mt19937_64& rng, const AugmentParams& params) {
  require(params.jpeg_quality_min >= 1 && params.jpeg_quality_max <= 100 &&
              params.jpeg_quality_min <= params.jpeg_quality_max,
          ErrorKind::validation, "invalid jpeg quality range");
  switch (kind) {
    case AugmentKind::noise: return apply_noise(image, rng, params);
    case AugmentKind::blur: return apply_blur(image, rng, params);
    case AugmentKind::jpeg: return apply_jpeg(image, rng, params);
    case AugmentKind::combined: return apply_noise(apply_jpeg(apply_blur(image, rng, params), rng, params), rng, params);
  }
  return image;
}

}  // namespace advblur
