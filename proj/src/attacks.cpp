#include "attacks.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"

namespace advblur {

const char* to_string(AttackFamily f) {
  switch (f) {
    case AttackFamily::additive: return "additive";
    case AttackFamily::spatial: return "spatial";
    case AttackFamily::blur: return "blur";
  }
  return "additive";
}

AttackFamily attack_family_from_string(const std::string& s) {
  if (s == "additive") return AttackFamily::additive;
  if (s == "spatial") return AttackFamily::spatial;
  if (s == "blur") return AttackFamily::blur;
  fail(ErrorKind::validation, "unknown attack family '" + s + "'");
}

void PerturbationBudget::validate() const {
  require(std::isfinite(epsilon) && epsilon >= 0.0, ErrorKind::validation, "epsilon must be finite and >= 0");
  require(steps >= 1, ErrorKind::validation, "steps must be >= 1");
  require(std::isfinite(step_size) && step_size >= 0.0, ErrorKind::validation, "step size must be >= 0");
  require(flow_reg >= 0.0, ErrorKind::validation, "flow regularization must be >= 0");
}

double PerturbationBudget::effective_step() const {
  if (step_size > 0.0) return step_size;
  return steps == 1 ? epsilon : epsilon / double(steps);
}

nlohmann::json PerturbationBudget::to_json() const {
  return {{"family", to_string(family)}, {"epsilon", epsilon}, {"steps", steps},
          {"step_size", step_size},      {"flow_reg", flow_reg}};
}

PerturbationBudget PerturbationBudget::from_json(const nlohmann::json& j) {
  PerturbationBudget b;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    if (key == "family") b.family = attack_family_from_string(it->get<std::string>());
    else if (key == "epsilon") b.epsilon = it->get<double>();
    else if (key == "steps") b.steps = it->get<int>();
    else if (key == "step_size") b.step_size = it->get<double>();
    else if (key == "flow_reg") b.flow_reg = it->get<double>();
    else fail(ErrorKind::config, "unknown budget key '" + key + "'");
  }
  b.validate();
  return b;
}

PerturbationBudget PerturbationBudget::additive(double epsilon, int steps, double step_size) {
  PerturbationBudget b;
  b.family = AttackFamily::additive;
  b.epsilon = epsilon;
  b.steps = steps;
  b.step_size = step_size;
  b.validate();
  return b;
}

PerturbationBudget PerturbationBudget::blur(double epsilon, int steps) {
  PerturbationBudget b;
  b.family = AttackFamily::blur;
  b.epsilon = epsilon;
  b.steps = steps;
  b.validate();
  return b;
}

PerturbationBudget PerturbationBudget::spatial(double epsilon, int steps, double step_size, double flow_reg) {
  PerturbationBudget b;
  b.family = AttackFamily::spatial;
  b.epsilon = epsilon;
  b.steps = steps;
  b.step_size = step_size;
  b.flow_reg = flow_reg;
  b.validate();
  return b;
}

FlowField FlowField::zeros(int h, int w) { return {Tensor(1, h, w), Tensor(1, h, w)}; }

double FlowField::max_magnitude() const {
  double m = 0.0;
  for (std::size_t p = 0; p < du.size(); ++p) m = std::max(m, std::hypot(du.data[p], dv.data[p]));
  return m;
}

AdversarialExample::AdversarialExample(Image image, const Image& reference, Provenance provenance,
                                       const SigmaMap* sigma, const FlowField* flow, const RhoBounds& bounds)
    : image_(std::move(image)), provenance_(std::move(provenance)) {
  require(image_.same_shape(reference), ErrorKind::shape, "adversarial image shape differs from its source");
  require(all_finite(image_.data), ErrorKind::numeric, "adversarial image has non-finite pixels");
  const PerturbationBudget& b = provenance_.budget;
  switch (provenance_.family) {
    case AttackFamily::additive: {
      const double d = max_abs_diff(image_, reference);
      require(d <= b.epsilon, ErrorKind::validation,
              "additive example violates l_inf budget: " + std::to_string(d) + " > " + std::to_string(b.epsilon));
      for (double v : image_.data)
        require(v >= 0.0 && v <= 1.0, ErrorKind::validation, "additive example leaves [0,1]");
      break;
    }
    case AttackFamily::blur: {
      require(sigma != nullptr, ErrorKind::validation, "blur example needs its sigma map");
      for (double s : sigma->sigma.data)
        require(s >= bounds.sigma_min() * (1.0 - 1e-12) && s <= bounds.sigma_max() * (1.0 + 1e-12),
                ErrorKind::validation, "blur example sigma " + std::to_string(s) + " outside bounds");
      break;
    }
    case AttackFamily::spatial: {
      require(flow != nullptr, ErrorKind::validation, "spatial example needs its flow field");
      const double m = flow->max_magnitude();
      require(m <= b.epsilon + 1e-9, ErrorKind::validation,
              "spatial example flow magnitude " + std::to_string(m) + " exceeds " + std::to_string(b.epsilon));
      break;
    }
  }
}

namespace {

Tensor input_gradient(const Classifier& model, const Image& x, int label, double* loss) {
  Tensor g;
  const double l = model.loss_and_input_grad(x, label, &g);
  if (!std::isfinite(l) || !all_finite(g.data))
    fail(ErrorKind::numeric, "non-finite input gradient from model '" + model.id() + "' (loss " +
                                 std::to_string(l) + ", label " + std::to_string(label) + ", image " +
                                 x.shape_string() + ")");
  if (loss != nullptr) *loss = l;
  return g;
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Projection onto the l_inf ball around x0 and [0,1]; rounding never leaves the ball.
double project(double v, double x0, double eps) {
  v = std::clamp(std::clamp(v, x0 - eps, x0 + eps), 0.0, 1.0);
  while (v - x0 > eps) v = std::nextafter(v, x0);
  while (x0 - v > eps) v = std::nextafter(v, x0);
  return v;
}

double loss_of(const Classifier& model, const Image& x, int label) { return model.loss_and_input_grad(x, label, nullptr); }

}  // namespace

AdversarialExample fgsm(const Classifier& model, const Image& image, int label, double epsilon) {
  const PerturbationBudget budget = PerturbationBudget::additive(epsilon);
  Provenance prov{AttackFamily::additive, budget, model.id(), 0.0, 0.0};
  if (epsilon == 0.0) {
    prov.loss_before = prov.loss_after = loss_of(model, image, label);
    return AdversarialExample(image, image, prov);
  }
  const Tensor g = input_gradient(model, image, label, &prov.loss_before);
  Image adv = image;
  for (std::size_t i = 0; i < adv.size(); ++i)
    adv.data[i] = project(image.data[i] + epsilon * sign(g.data[i]), image.data[i], epsilon);
  prov.loss_after = loss_of(model, adv, label);
  return AdversarialExample(std::move(adv), image, prov);
}

AdversarialExample pgd(const Classifier& model, const Image& image, int label, const PerturbationBudget& budget) {
  budget.validate();
  require(budget.family == AttackFamily::additive, ErrorKind::validation, "pgd needs an additive budget");
  Provenance prov{AttackFamily::additive, budget, model.id(), 0.0, 0.0};
  const double eps = budget.epsilon;
  if (eps == 0.0) {
    prov.loss_before = prov.loss_after = loss_of(model, image, label);
    return AdversarialExample(image, image, prov);
  }
  const double alpha = budget.effective_step();
  Image adv = image;
  for (int s = 0; s < budget.steps; ++s) {
    double l = 0.0;
    const Tensor g = input_gradient(model, adv, label, &l);
    if (s == 0) prov.loss_before = l;
    for (std::size_t i = 0; i < adv.size(); ++i) {
      const double x0 = image.data[i];
      const double stepped = adv.data[i] + alpha * sign(g.data[i]);
      adv.data[i] = project(stepped, x0, eps);
    }
  }
  prov.loss_after = loss_of(model, adv, label);
  return AdversarialExample(std::move(adv), image, prov);
}

BlurAttackResult blur_attack(const Classifier& model, const Image& image, int label, const PerturbationBudget& budget,
                             const SigmaMap& sigma_init, const BlurSpec& spec, const RhoBounds& bounds) {
  budget.validate();
  bounds.validate();
  require(budget.family == AttackFamily::blur, ErrorKind::validation, "blur_attack needs a blur budget");
  require(sigma_init.sigma.h == image.h && sigma_init.sigma.w == image.w, ErrorKind::shape,
          "sigma_init does not match the image");
  sigma_init.validate();
  Provenance prov{AttackFamily::blur, budget, model.id(), loss_of(model, image, label), 0.0};

  SigmaMap sigma = sigma_init;
  for (double& s : sigma.sigma.data) s = std::clamp(s, bounds.sigma_min(), bounds.sigma_max());
  if (budget.epsilon > 0.0) {
    RhoMap rho = RhoMap::from_sigma(sigma, bounds);
    const double step = budget.epsilon / double(budget.steps);
    for (int s = 0; s < budget.steps; ++s) {
      const SigmaMap current = rho.to_sigma();
      const Image blurred = blur_apply(image, current, spec);
      const Tensor g = input_gradient(model, blurred, label, nullptr);
      const Tensor d_rho = sigma_grad_to_rho(blur_backward(image, current, spec, g).d_sigma, current);
      require(all_finite(d_rho.data), ErrorKind::numeric,
              "non-finite sigma gradient from model '" + model.id() + "' at step " + std::to_string(s));
      for (std::size_t p = 0; p < rho.rho.size(); ++p) rho.rho.data[p] += step * d_rho.data[p];
      rho.clamp(bounds);
    }
    sigma = rho.to_sigma();
  }
  Image adv = blur_apply(image, sigma, spec);
  prov.loss_after = loss_of(model, adv, label);
  AdversarialExample ex(std::move(adv), image, prov, &sigma, nullptr, bounds);
  return {std::move(ex), std::move(sigma)};
}

namespace {

struct Sample {
  int i0, i1, j0, j1;
  double a, b;
  bool clamped_i, clamped_j;
};

Sample sample_point(double pi, double pj, int h, int w) {
  Sample s{};
  s.clamped_i = pi < 0.0 || pi > double(h - 1);
  s.clamped_j = pj < 0.0 || pj > double(w - 1);
  pi = std::clamp(pi, 0.0, double(h - 1));
  pj = std::clamp(pj, 0.0, double(w - 1));
  s.i0 = int(std::floor(pi));
  s.j0 = int(std::floor(pj));
  s.i1 = std::min(s.i0 + 1, h - 1);
  s.j1 = std::min(s.j0 + 1, w - 1);
  s.a = pi - s.i0;
  s.b = pj - s.j0;
  return s;
}

void check_flow(const Image& image, const FlowField& flow) {
  require(flow.du.c == 1 && flow.du.h == image.h && flow.du.w == image.w && flow.dv.same_shape(flow.du),
          ErrorKind::shape, "flow field does not match image " + image.shape_string());
  require(all_finite(flow.du.data) && all_finite(flow.dv.data), ErrorKind::numeric, "flow field is not finite");
}

}  // namespace

Image warp_bilinear(const Image& image, const FlowField& flow) {
  check_flow(image, flow);
  Image out(image.c, image.h, image.w);
  for (int i = 0; i < image.h; ++i)
    for (int j = 0; j < image.w; ++j) {
      const std::size_t p = std::size_t(i) * image.w + j;
      const Sample s = sample_point(i + flow.du.data[p], j + flow.dv.data[p], image.h, image.w);
      for (int ch = 0; ch < image.c; ++ch) {
        const double top = (1.0 - s.b) * image.at(ch, s.i0, s.j0) + s.b * image.at(ch, s.i0, s.j1);
        const double bottom = (1.0 - s.b) * image.at(ch, s.i1, s.j0) + s.b * image.at(ch, s.i1, s.j1);
        out.at(ch, i, j) = (1.0 - s.a) * top + s.a * bottom;
      }
    }
  return out;
}

WarpGradients warp_bilinear_backward(const Image& image, const FlowField& flow, const Tensor& grad_out) {
  check_flow(image, flow);
  require(grad_out.same_shape(image), ErrorKind::shape, "warp gradient shape mismatch");
  WarpGradients g{Tensor(1, image.h, image.w), Tensor(1, image.h, image.w)};
  for (int i = 0; i < image.h; ++i)
    for (int j = 0; j < image.w; ++j) {
      const std::size_t p = std::size_t(i) * image.w + j;
      const Sample s = sample_point(i + flow.du.data[p], j + flow.dv.data[p], image.h, image.w);
      double gi = 0.0, gj = 0.0;
      for (int ch = 0; ch < image.c; ++ch) {
        const double x00 = image.at(ch, s.i0, s.j0), x01 = image.at(ch, s.i0, s.j1);
        const double x10 = image.at(ch, s.i1, s.j0), x11 = image.at(ch, s.i1, s.j1);
        const double go = grad_out.at(ch, i, j);
        gi += go * ((1.0 - s.b) * (x10 - x00) + s.b * (x11 - x01));
        gj += go * ((1.0 - s.a) * (x01 - x00) + s.a * (x11 - x10));
      }
      g.d_du.data[p] = s.clamped_i ? 0.0 : gi;
      g.d_dv.data[p] = s.clamped_j ? 0.0 : gj;
    }
  return g;
}

double flow_total_variation(const FlowField& flow, FlowField* grad) {
  const int h = flow.du.h, w = flow.du.w;
  if (grad != nullptr) *grad = FlowField::zeros(h, w);
  double tv = 0.0;
  auto edge = [&](std::size_t p, std::size_t q) {
    const double a = flow.du.data[q] - flow.du.data[p];
    const double b = flow.dv.data[q] - flow.dv.data[p];
    const double n = std::sqrt(a * a + b * b + 1e-8);
    tv += n;
    if (grad != nullptr) {
      grad->du.data[q] += a / n;
      grad->du.data[p] -= a / n;
      grad->dv.data[q] += b / n;
      grad->dv.data[p] -= b / n;
    }
  };
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const std::size_t p = std::size_t(i) * w + j;
      if (i + 1 < h) edge(p, p + w);
      if (j + 1 < w) edge(p, p + 1);
    }
  return tv;
}

SpatialAttackResult spatial_attack(const Classifier& model, const Image& image, int label,
                                   const PerturbationBudget& budget) {
  budget.validate();
  require(budget.family == AttackFamily::spatial, ErrorKind::validation, "spatial_attack needs a spatial budget");
  Provenance prov{AttackFamily::spatial, budget, model.id(), loss_of(model, image, label), 0.0};
  FlowField flow = FlowField::zeros(image.h, image.w);
  if (budget.epsilon > 0.0) {
    const double alpha = budget.effective_step();
    for (int s = 0; s < budget.steps; ++s) {
      const Image warped = warp_bilinear(image, flow);
      const Tensor g = input_gradient(model, warped, label, nullptr);
      const WarpGradients wg = warp_bilinear_backward(image, flow, g);
      FlowField tv_grad;
      flow_total_variation(flow, &tv_grad);
      for (std::size_t p = 0; p < flow.du.size(); ++p) {
        const double gu = wg.d_du.data[p] - budget.flow_reg * tv_grad.du.data[p];
        const double gv = wg.d_dv.data[p] - budget.flow_reg * tv_grad.dv.data[p];
        require(std::isfinite(gu) && std::isfinite(gv), ErrorKind::numeric,
                "non-finite flow gradient from model '" + model.id() + "'");
        flow.du.data[p] += alpha * sign(gu);
        flow.dv.data[p] += alpha * sign(gv);
        const double m = std::hypot(flow.du.data[p], flow.dv.data[p]);
        if (m > budget.epsilon) {
          const double scale = budget.epsilon / m;
          flow.du.data[p] *= scale;
          flow.dv.data[p] *= scale;
        }
      }
    }
  }
  Image adv = warp_bilinear(image, flow);
  prov.loss_after = loss_of(model, adv, label);
  AdversarialExample ex(std::move(adv), image, prov, nullptr, &flow);
  return {std::move(ex), std::move(flow)};
}

AdversarialExample combined_attack(const Classifier& model, const Image& image, int label,
                                   const PerturbationBudget& blur_budget, const PerturbationBudget& additive_budget,
                                   const SigmaSource& sigma_source, const BlurSpec& spec, const RhoBounds& bounds) {
  require(additive_budget.family == AttackFamily::additive, ErrorKind::validation,
          "combined attack needs an additive second stage");
  Image first;
  if (const auto* init = std::get_if<SigmaMap>(&sigma_source)) {
    first = blur_attack(model, image, label, blur_budget, *init, spec, bounds).example.image();
  } else {
    const Generator* gen = std::get<const Generator*>(sigma_source);
    require(gen != nullptr, ErrorKind::validation, "null generator passed as sigma source");
    const SigmaMap sigma = generate_sigma(*gen, image);
    first = AdversarialExample(blur_apply(image, sigma, spec), image,
                               Provenance{AttackFamily::blur, blur_budget, model.id(), 0.0, 0.0}, &sigma, nullptr,
                               gen->arch().bounds)
                .image();
  }
  const AdversarialExample second = pgd(model, first, label, additive_budget);
  Provenance prov = second.provenance();
  prov.loss_before = loss_of(model, image, label);
  return AdversarialExample(second.image(), first, prov);
}

}  // namespace advblur
