#include <cmath>

#include "augment.hpp"
#include "detector.hpp"
#include "gradcheck.hpp"
#include "helpers.hpp"
#include "optim.hpp"
#include "toy_models.hpp"

using namespace advblur;
using testutil::error_kind;
using testutil::random_image;

TEST_SUITE("detector") {
  TEST_CASE("cross-entropy examples") {
    CHECK(cross_entropy({0.3, 0.3}, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(cross_entropy({-2.0, -2.0}, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(cross_entropy({0.0, 800.0}, 1) < 1e-300);
    CHECK(std::isfinite(cross_entropy({0.0, 800.0}, 0)));
    const std::vector<Logits> z{{0.2, -1.3}, {1.1, 2.4}};
    const std::vector<int> y{0, 1};
    const double expect = 0.5 * (oracle::softmax_xent(0.2, -1.3, 0) + oracle::softmax_xent(1.1, 2.4, 1));
    CHECK(std::abs(mean_cross_entropy(z, y) - expect) <= 1e-9);
    CHECK(error_kind([] { cross_entropy({0.0, 0.0}, 2); }) == ErrorKind::validation);
  }

  TEST_CASE("forward is deterministic and finite") {
    Detector d(testutil::small_arch(32), "d");
    d.init(1);
    const Image x = random_image(3, 32, 32, 2);
    const Logits a = d.logits(x), b = d.logits(x);
    CHECK(a == b);
    CHECK(std::isfinite(a[0]));
    CHECK(std::isfinite(a[1]));
    Detector e(testutil::small_arch(32), "e");
    e.init(1);
    CHECK(e.params() == d.params());
  }

  TEST_CASE("input shape is checked") {
    Detector d(testutil::small_arch(32), "d");
    d.init(1);
    CHECK(error_kind([&] { d.logits(random_image(3, 16, 16, 1)); }) == ErrorKind::shape);
  }

  TEST_CASE("parameter and input gradients match finite differences") {
    Detector d(testutil::small_arch(32), "d");
    d.init(3);
    const Image x = random_image(3, 32, 32, 4);
    CHECK(detector_param_check(d, x, 1, 10, 5).pass());
    CHECK(detector_param_check(d, x, 0, 64, 6).pass());
    const SigmaMap s = SigmaMap::constant(32, 32, 0.8);
    CHECK(detector_blur_path_check(d, x, 1, s, BlurSpec{}, GradParam::sigma, 32, 7).pass());
    // This sample includes a pixel whose step straddles a leaky-ReLU kink; it is skipped, not averaged in.
    const GradCheckCase r = detector_blur_path_check(d, x, 0, s, BlurSpec{}, GradParam::rho, 32, 8);
    CHECK(r.skipped >= 1);
    CHECK(r.pass());
  }

  TEST_CASE("unknown backbones are rejected and new ones can be registered") {
    DetectorArch a = testutil::small_arch();
    a.backbone = "no_such_backbone";
    CHECK(error_kind([&] { Detector d(a); }) == ErrorKind::config);
    register_backbone("linear_probe", [](const DetectorArch& arch) {
      DetectorArch inner = arch;
      inner.backbone = "small_cnn";
      inner.widths = {4};
      return make_backbone(inner);
    });
    a.backbone = "linear_probe";
    Detector d(a);
    d.init(1);
    CHECK(std::isfinite(d.logits(random_image(3, 16, 16, 1))[0]));
  }

  TEST_CASE("first RAdam steps are momentum-only SGD") {
    // With rho_t <= 5 the rectification is off and the update is lr * m_hat = lr * g on step one.
    RAdam opt(3, 0.9, 0.999, 1e-8, 0.0);
    std::vector<double> p{1.0, -2.0, 0.5};
    const std::vector<double> g{0.3, -0.1, 2.0};
    opt.step(p, g, 0.01);
    CHECK(p[0] == doctest::Approx(1.0 - 0.003).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(-2.0 + 0.001).epsilon(1e-14));
    CHECK(p[2] == doctest::Approx(0.5 - 0.02).epsilon(1e-14));
    std::vector<double> q = p;
    opt.step(q, std::vector<double>(3, 0.0), 0.0);
    CHECK(q == p);
  }

  TEST_CASE("step decay schedule") {
    OptimSettings s;
    CHECK(s.lr_at_epoch(0) == 5e-4);
    CHECK(s.lr_at_epoch(9) == 5e-4);
    CHECK(s.lr_at_epoch(10) == doctest::Approx(5e-5));
    CHECK(s.lr_at_epoch(25) == doctest::Approx(5e-6));
    s.decay_every = 0;
    CHECK(s.lr_at_epoch(25) == 5e-4);
  }

  TEST_CASE("augmentations never modify their input") {
    const Image x = random_image(3, 16, 16, 9);
    const Image keep = x;
    std::mt19937_64 rng(1);
    for (AugmentKind k : {AugmentKind::noise, AugmentKind::blur, AugmentKind::jpeg, AugmentKind::combined})
      for (int i = 0; i < 10; ++i) {
        const Image y = augment_traditional(x, k, rng);
        CHECK(y.same_shape(x));
        for (double v : y.data) {
          CHECK(v >= 0.0);
          CHECK(v <= 1.0);
        }
      }
    CHECK(x.data == keep.data);
  }

  TEST_CASE("zero-variance noise leaves the image unchanged") {
    const Image x = random_image(3, 16, 16, 10);
    std::mt19937_64 rng(2);
    CHECK(add_gaussian_noise(x, 0.0, 0.0, rng).data == x.data);
    CHECK(gaussian_blur(x, 0.0, 9).data == x.data);
  }

  TEST_CASE("augmentation defaults") {
    const AugmentParams p;
    CHECK(p.noise_p == 0.5);
    CHECK(p.noise_mean == 0.0);
    CHECK(p.noise_var_max == 30.0);
    CHECK(p.blur_kernel == 9);
    CHECK(p.jpeg_quality_min == 60);
    CHECK(p.jpeg_quality_max == 100);
  }
}
