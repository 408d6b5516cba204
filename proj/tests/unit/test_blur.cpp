#include <cmath>
#include <numbers>

#include "blur.hpp"
#include "helpers.hpp"

using namespace advblur;
using testutil::error_kind;
using testutil::random_image;

namespace {

SigmaMap random_sigma(int h, int w, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  SigmaMap s = SigmaMap::constant(h, w, 1.0);
  for (double& v : s.sigma.data) v = u(rng);
  return s;
}

double max_diff(const Image& a, const oracle::Planes& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.v[i]));
  return m;
}

}  // namespace

TEST_SUITE("blurcore") {
  TEST_CASE("kernel of size one is the unit kernel") {
    const auto k = gaussian_kernel(1.0, BlurSpec{1, Boundary::reflect, true});
    REQUIRE(k.size() == 1);
    CHECK(k[0] == 1.0);
  }

  TEST_CASE("unnormalized 3x3 kernel matches direct evaluation") {
    const auto k = gaussian_kernel(1.0, BlurSpec{3, Boundary::reflect, false});
    const double center = 1.0 / (2.0 * 3.14159265358979323846);
    CHECK(k[4] == doctest::Approx(center).epsilon(1e-14));
    CHECK(k[0] == doctest::Approx(center * std::exp(-1.0)).epsilon(1e-14));
    CHECK(k[1] == doctest::Approx(center * std::exp(-0.5)).epsilon(1e-14));
    CHECK(center == doctest::Approx(0.159155).epsilon(1e-6));
    CHECK(k[0] == doctest::Approx(0.058550).epsilon(1e-5));
  }

  TEST_CASE("small sigma approaches the delta kernel") {
    const auto k = gaussian_kernel(0.1, BlurSpec{9, Boundary::reflect, true});
    double total = 0.0;
    for (int u = -4; u <= 4; ++u)
      for (int v = -4; v <= 4; ++v) total += std::exp(-(u * u + v * v) / (2 * 0.01));
    CHECK(k[40] == doctest::Approx(1.0 / total).epsilon(1e-12));
    CHECK(k[40] >= 1.0 - 1e-6);
  }

  TEST_CASE("kernel errors") {
    CHECK(error_kind([] { gaussian_kernel(0.0, BlurSpec{}); }) == ErrorKind::domain);
    CHECK(error_kind([] { gaussian_kernel(-1.0, BlurSpec{}); }) == ErrorKind::domain);
    CHECK(error_kind([] { gaussian_kernel(1.0, BlurSpec{4, Boundary::reflect, true}); }) == ErrorKind::spec);
  }

  TEST_CASE("kernel symmetry is exact and normalized kernels sum to one") {
    for (int k : {1, 3, 5, 9}) {
      for (double logs = -3.0; logs <= 3.0; logs += 0.25) {
        const double sigma = std::pow(10.0, logs);
        const auto g = gaussian_kernel(sigma, BlurSpec{k, Boundary::reflect, true});
        const int r = k / 2;
        auto at = [&](int u, int v) { return g[std::size_t(u + r) * k + (v + r)]; };
        double total = 0.0;
        for (int u = -r; u <= r; ++u)
          for (int v = -r; v <= r; ++v) {
            CHECK(at(u, v) == at(-u, v));
            CHECK(at(u, v) == at(u, -v));
            CHECK(at(u, v) == at(v, u));
            total += at(u, v);
          }
        CHECK(std::abs(total - 1.0) <= 1e-12);
      }
    }
  }

  TEST_CASE("constant image is a fixed point") {
    const Image x(3, 12, 12, 0.5);
    for (Boundary b : {Boundary::reflect, Boundary::replicate}) {
      const Image y = blur_apply(x, random_sigma(12, 12, 0.01, 50.0, 3), BlurSpec{9, b, true});
      for (double v : y.data) CHECK(std::abs(v - 0.5) <= 1e-6);
    }
  }

  TEST_CASE("tiny sigma is the identity") {
    const Image x = random_image(3, 16, 16, 4);
    const Image y = blur_apply(x, SigmaMap::constant(16, 16, 1e-3), BlurSpec{});
    CHECK(max_abs_diff(x, y) <= 1e-4);
  }

  TEST_CASE("8x8 unit-sigma blur matches the brute-force loop") {
    const Image x = random_image(1, 8, 8, 5);
    const SigmaMap s = SigmaMap::constant(8, 8, 1.0);
    const Image y = blur_apply(x, s, BlurSpec{3, Boundary::reflect, true});
    CHECK(max_diff(y, oracle::naive_blur(testutil::planes(x), s.sigma.data, 3, oracle::Pad::reflect, true)) <= 1e-9);
  }

  TEST_CASE("vectorized blur equals the naive loop on all small shapes") {
    std::uint64_t seed = 100;
    double worst = 0.0;
    for (int k : {1, 3, 5, 9})
      for (int h = k; h <= 16; h += 3)
        for (int w = k; w <= 16; w += 4)
          for (Boundary b : {Boundary::reflect, Boundary::replicate, Boundary::zero})
            for (bool norm : {true, false}) {
              const int c = (h + w) % 2 ? 3 : 1;
              const Image x = random_image(c, h, w, ++seed);
              const SigmaMap s = random_sigma(h, w, 0.2, 5.0, ++seed);
              const Image y = blur_apply(x, s, BlurSpec{k, b, norm});
              const oracle::Pad pad = b == Boundary::reflect     ? oracle::Pad::reflect
                                      : b == Boundary::replicate ? oracle::Pad::replicate
                                                                 : oracle::Pad::zero;
              worst = std::max(worst, max_diff(y, oracle::naive_blur(testutil::planes(x), s.sigma.data, k, pad, norm)));
            }
    CHECK(worst <= 1e-9);
  }

  TEST_CASE("shape errors") {
    const Image x = random_image(1, 8, 8, 6);
    CHECK(error_kind([&] { blur_apply(x, SigmaMap::constant(8, 7, 1.0), BlurSpec{3}); }) == ErrorKind::shape);
    CHECK(error_kind([&] { blur_apply(x, SigmaMap::constant(8, 8, 1.0), BlurSpec{9}); }) == ErrorKind::shape);
  }

  TEST_CASE("normalized output stays within the neighbourhood range") {
    const Image x = random_image(3, 14, 11, 7);
    const SigmaMap s = random_sigma(14, 11, 0.1, 8.0, 8);
    const BlurSpec spec{5, Boundary::reflect, true};
    const Image y = blur_apply(x, s, spec);
    const oracle::Planes p = testutil::planes(x);
    for (int ch = 0; ch < 3; ++ch)
      for (int i = 0; i < 14; ++i)
        for (int j = 0; j < 11; ++j) {
          double lo = 1e9, hi = -1e9;
          for (int u = -2; u <= 2; ++u)
            for (int v = -2; v <= 2; ++v) {
              const double n = oracle::padded(p, ch, i + u, j + v, oracle::Pad::reflect);
              lo = std::min(lo, n);
              hi = std::max(hi, n);
            }
          CHECK(y.at(ch, i, j) >= lo - 1e-15);
          CHECK(y.at(ch, i, j) <= hi + 1e-15);
        }
  }

  TEST_CASE("blur is linear in the image") {
    const Image x = random_image(3, 10, 10, 9), z = random_image(3, 10, 10, 10);
    const SigmaMap s = random_sigma(10, 10, 0.3, 3.0, 11);
    Image mix = x;
    for (std::size_t i = 0; i < mix.size(); ++i) mix.data[i] = 0.3 * x.data[i] - 1.7 * z.data[i];
    const Image a = blur_apply(x, s, BlurSpec{5}), b = blur_apply(z, s, BlurSpec{5}), m = blur_apply(mix, s, BlurSpec{5});
    for (std::size_t i = 0; i < m.size(); ++i) CHECK(std::abs(m.data[i] - (0.3 * a.data[i] - 1.7 * b.data[i])) <= 1e-9);
  }

  TEST_CASE("huge sigma gives the local mean") {
    const Image x = random_image(1, 9, 9, 12);
    const Image y = blur_apply(x, SigmaMap::constant(9, 9, 1e3), BlurSpec{3});
    const oracle::Planes p = testutil::planes(x);
    for (int i = 0; i < 9; ++i)
      for (int j = 0; j < 9; ++j) {
        double mean = 0.0;
        for (int u = -1; u <= 1; ++u)
          for (int v = -1; v <= 1; ++v) mean += oracle::padded(p, 0, i + u, j + v, oracle::Pad::reflect) / 9.0;
        CHECK(std::abs(y.at(0, i, j) - mean) <= 1e-3);
      }
  }

  TEST_CASE("rho map round trip and bounds") {
    const SigmaMap s = random_sigma(6, 6, 0.002, 9.0, 13);
    const SigmaMap back = RhoMap::from_sigma(s, RhoBounds{}).to_sigma();
    for (std::size_t i = 0; i < s.sigma.size(); ++i) CHECK(std::abs(back.sigma.data[i] - s.sigma.data[i]) <= 1e-9);
    const SigmaMap wide = random_sigma(6, 6, 1e-5, 100.0, 14);
    const RhoMap r = RhoMap::from_sigma(wide, RhoBounds{});
    for (double v : r.rho.data) {
      CHECK(v >= 0.1);
      CHECK(v <= 1000.0);
    }
  }

  TEST_CASE("gradient of the mean of a blurred constant vanishes") {
    const Image x(3, 10, 10, 0.4);
    const SigmaMap s = random_sigma(10, 10, 0.5, 2.0, 15);
    const BlurGradients g = blur_backward(x, s, BlurSpec{}, Tensor(3, 10, 10, 1.0 / 300.0));
    for (double v : g.d_sigma.data) CHECK(std::abs(v) <= 1e-12);
  }

  TEST_CASE("sum-of-squares gradient matches finite differences in sigma and rho") {
    const Image x = random_image(1, 8, 8, 16);
    const SigmaMap s = random_sigma(8, 8, 0.5, 2.0, 17);
    for (GradParam p : {GradParam::sigma, GradParam::rho}) {
      GradCheckOptions opt;
      opt.param = p;
      opt.fd_step = 1e-3;
      const GradCheckResult r = blur_gradient_check(x, s, BlurSpec{5}, sum_of_squares_loss(), opt);
      CHECK(r.checked == 64);
      CHECK(r.max_rel_error < 1e-4);
    }
  }

  TEST_CASE("rho gradient obeys the reciprocal chain rule") {
    const Image x = random_image(3, 9, 9, 18);
    const SigmaMap s = random_sigma(9, 9, 0.5, 3.0, 19);
    const Image y = blur_apply(x, s, BlurSpec{});
    const Tensor d_sigma = blur_backward(x, s, BlurSpec{}, sum_of_squares_loss().gradient(y)).d_sigma;
    const Tensor d_rho = sigma_grad_to_rho(d_sigma, s);
    for (std::size_t i = 0; i < d_rho.size(); ++i) {
      const double sg = s.sigma.data[i];
      CHECK(std::abs(d_rho.data[i] - (-sg * sg * d_sigma.data[i])) <= 1e-4 * (1.0 + std::abs(d_rho.data[i])));
    }
  }
}
