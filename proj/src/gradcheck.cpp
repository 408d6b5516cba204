#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

#include "errors.hpp"

namespace advblur {

nlohmann::ordered_json GradCheckCase::to_json() const {
  return {{"name", name}, {"rel_error", rel_error}, {"tolerance", tolerance}, {"checked", checked},
          {"skipped", skipped},      {"pass", pass()}};
}

namespace {

Image random_image(int c, int h, int w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image x(c, h, w);
  for (double& v : x.data) v = u(rng);
  return x;
}

SigmaMap random_sigma(int h, int w, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  SigmaMap s = SigmaMap::constant(h, w, 1.0);
  for (double& v : s.sigma.data) v = u(rng);
  return s;
}

ScalarLoss weighted_linear_loss(const Image& shape, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  auto weights = std::make_shared<Tensor>(shape.c, shape.h, shape.w);
  for (double& v : weights->data) v = n(rng);
  return {[weights](const Tensor& y) {
            double s = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) s += weights->data[i] * y.data[i];
            return s;
          },
          [weights](const Tensor&) { return *weights; }};
}

double norm_rel_error(const std::vector<double>& a, const std::vector<double>& fd) {
  double diff = 0.0, na = 0.0, nf = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - fd[i]) * (a[i] - fd[i]);
    na += a[i] * a[i];
    nf += fd[i] * fd[i];
  }
  const double scale = std::max(std::sqrt(std::max(na, nf)), 1e-12);
  return std::sqrt(diff) / scale;
}

std::vector<std::size_t> sample_indices(std::size_t n, int samples, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (samples > 0 && std::size_t(samples) < n) {
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::size_t(samples));
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

/// Central difference of f at 0, or nothing when the one-sided slopes disagree (a leaky-ReLU kink inside +-h).
template <class F>
std::optional<double> central_difference(F&& f, double h) {
  const double up = f(h), mid = f(0.0), down = f(-h);
  const double fwd = (up - mid) / h, bwd = (mid - down) / h;
  if (std::abs(fwd - bwd) > 0.05 * std::max(std::abs(fwd), std::abs(bwd)) + 1e-8) return std::nullopt;
  return (up - down) / (2.0 * h);
}

}  // namespace

std::vector<GradCheckCase> blur_gradient_cases(int cases, std::uint64_t seed, double tolerance) {
  require(cases >= 1, ErrorKind::validation, "need at least one gradient case");
  std::mt19937_64 rng(seed);
  const int kernels[] = {3, 5, 9};
  const Boundary boundaries[] = {Boundary::reflect, Boundary::replicate, Boundary::zero};
  std::vector<GradCheckCase> out;
  for (int i = 0; i < cases; ++i) {
    std::uniform_int_distribution<int> pick(0, 2), chan(0, 1);
    BlurSpec spec;
    spec.k = kernels[pick(rng)];
    std::uniform_int_distribution<int> size(spec.k, 12);
    const int h = size(rng), w = size(rng), c = chan(rng) ? 3 : 1;
    spec.boundary = boundaries[pick(rng)];
    spec.normalize = i % 4 != 3;
    const Image x = random_image(c, h, w, rng);
    const SigmaMap sigma = random_sigma(h, w, 0.5, 3.0, rng);
    const int which = pick(rng);
    const ScalarLoss loss = which == 0 ? mean_loss() : which == 1 ? sum_of_squares_loss() : weighted_linear_loss(x, rng);
    for (GradParam param : {GradParam::sigma, GradParam::rho}) {
      GradCheckOptions opt;
      opt.param = param;
      opt.fd_step = 1e-4;
      const GradCheckResult r = blur_gradient_check(x, sigma, spec, loss, opt);
      out.push_back({"blur/" + std::string(param == GradParam::sigma ? "sigma" : "rho") + "/case" + std::to_string(i),
                     r.max_rel_error, tolerance, r.checked});
    }
  }
  return out;
}

GradCheckCase detector_blur_path_check(const Detector& model, const Image& image, int label, const SigmaMap& sigma,
                                       const BlurSpec& spec, GradParam param, int samples, std::uint64_t seed,
                                       double tolerance) {
  const Image y = blur_apply(image, sigma, spec);
  Tensor dy;
  model.loss_and_input_grad(y, label, &dy);
  const BlurGradients g = blur_backward(image, sigma, spec, dy);
  const Tensor analytic = param == GradParam::sigma ? g.d_sigma : sigma_grad_to_rho(g.d_sigma, sigma);

  const double h = 1e-5;
  std::vector<double> a, fd;
  int skipped = 0;
  for (std::size_t p : sample_indices(sigma.sigma.size(), samples, seed)) {
    auto eval = [&](double delta) {
      SigmaMap s = sigma;
      double& v = s.sigma.data[p];
      v = param == GradParam::sigma ? v + delta : 1.0 / (1.0 / v + delta);
      return model.loss_and_input_grad(blur_apply(image, s, spec), label, nullptr);
    };
    const auto d = central_difference(eval, h);
    if (!d) {
      ++skipped;
      continue;
    }
    fd.push_back(*d);
    a.push_back(analytic.data[p]);
  }
  return {std::string("detector/blur_path/") + (param == GradParam::sigma ? "sigma" : "rho"), norm_rel_error(a, fd),
          tolerance, int(a.size()), skipped};
}

GradCheckCase detector_param_check(const Detector& model, const Image& image, int label, int samples,
                                   std::uint64_t seed, double tolerance) {
  std::vector<double> grad(model.num_params(), 0.0);
  const std::vector<Tensor> batch{image};
  const std::vector<int> labels{label};
  model.accumulate_param_grad(batch, labels, 1.0, grad);
  Detector probe(model.arch(), model.id());
  probe.params() = model.params();
  const double h = 1e-5;
  std::vector<double> a, fd;
  int skipped = 0;
  for (std::size_t p : sample_indices(grad.size(), samples, seed)) {
    const double keep = probe.params()[p];
    auto eval = [&](double delta) {
      probe.params()[p] = keep + delta;
      const double l = probe.loss(batch, labels);
      probe.params()[p] = keep;
      return l;
    };
    const auto d = central_difference(eval, h);
    if (!d) {
      ++skipped;
      continue;
    }
    fd.push_back(*d);
    a.push_back(grad[p]);
  }
  return {"detector/params", norm_rel_error(a, fd), tolerance, int(a.size()), skipped};
}

std::vector<GradCheckCase> run_grad_checks(int cases, std::uint64_t seed) {
  std::vector<GradCheckCase> out = blur_gradient_cases(cases, seed);
  DetectorArch arch;
  arch.height = 32;
  arch.width = 32;
  Detector model(arch, "gradcheck");
  model.init(seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const Image x = random_image(arch.channels, arch.height, arch.width, rng);
  const SigmaMap sigma = random_sigma(arch.height, arch.width, 0.5, 2.0, rng);
  const BlurSpec spec;
  for (GradParam p : {GradParam::sigma, GradParam::rho})
    out.push_back(detector_blur_path_check(model, x, kLabelFake, sigma, spec, p, 64, seed + 1));
  out.push_back(detector_param_check(model, x, kLabelFake, 64, seed + 2));
  return out;
}

}  // namespace advblur
