#pragma once

#include <optional>
#include <string>
#include <variant>

#include "blur.hpp"
#include "detector.hpp"
#include "generator.hpp"
#include "json.hpp"
#include "tensor.hpp"

namespace advblur {

enum class AttackFamily { additive, spatial, blur };

const char* to_string(AttackFamily f);
AttackFamily attack_family_from_string(const std::string& s);

/// Constraint set for one attack: family, bound, step schedule and projection rule.
struct PerturbationBudget {
  AttackFamily family = AttackFamily::additive;
  double epsilon = 16.0 / 255.0;  // additive: l_inf radius; blur: rho step; spatial: max flow magnitude (px)
  int steps = 1;
  double step_size = 0.0;         // 0 selects the family default
  double flow_reg = 0.05;         // spatial only: weight of the total-variation penalty

  void validate() const;
  /// Per-step size actually used.
  double effective_step() const;
  nlohmann::json to_json() const;
  static PerturbationBudget from_json(const nlohmann::json& j);

  static PerturbationBudget additive(double epsilon, int steps = 1, double step_size = 0.0);
  static PerturbationBudget blur(double epsilon, int steps = 1);
  static PerturbationBudget spatial(double epsilon, int steps = 5, double step_size = 0.0, double flow_reg = 0.05);
};

/// Per-pixel displacement (rows, columns) in pixels.
struct FlowField {
  Tensor du;
  Tensor dv;

  static FlowField zeros(int h, int w);
  double max_magnitude() const;
};

struct Provenance {
  AttackFamily family = AttackFamily::additive;
  PerturbationBudget budget;
  std::string source_model;
  double loss_before = 0.0;
  double loss_after = 0.0;
};

/// An attacked image whose budget compliance is verified on construction.
class AdversarialExample {
 public:
  /// Additive / spatial / blur constraint relative to `reference`; throws on violation.
  AdversarialExample(Image image, const Image& reference, Provenance provenance,
                     const SigmaMap* sigma = nullptr, const FlowField* flow = nullptr,
                     const RhoBounds& bounds = {});

  const Image& image() const { return image_; }
  const Provenance& provenance() const { return provenance_; }

 private:
  Image image_;
  Provenance provenance_;
};

AdversarialExample fgsm(const Classifier& model, const Image& image, int label, double epsilon);
AdversarialExample pgd(const Classifier& model, const Image& image, int label, const PerturbationBudget& budget);

struct BlurAttackResult {
  AdversarialExample example;
  SigmaMap sigma;
};

/// Gradient ascent on rho = 1/sigma starting from sigma_init; epsilon/steps per step.
BlurAttackResult blur_attack(const Classifier& model, const Image& image, int label, const PerturbationBudget& budget,
                             const SigmaMap& sigma_init, const BlurSpec& spec, const RhoBounds& bounds = {});

/// Backward bilinear warp: out(i,j) = x(i + du, j + dv), coordinates clamped to the image.
Image warp_bilinear(const Image& image, const FlowField& flow);

struct WarpGradients {
  Tensor d_du;
  Tensor d_dv;
};
WarpGradients warp_bilinear_backward(const Image& image, const FlowField& flow, const Tensor& grad_out);

/// Smoothed total variation of the flow, sum over 4-neighbours of sqrt(|df|^2 + 1e-8).
double flow_total_variation(const FlowField& flow, FlowField* grad);

struct SpatialAttackResult {
  AdversarialExample example;
  FlowField flow;
};

SpatialAttackResult spatial_attack(const Classifier& model, const Image& image, int label,
                                   const PerturbationBudget& budget);

/// Where the first-stage sigma map comes from.
using SigmaSource = std::variant<SigmaMap, const Generator*>;

AdversarialExample combined_attack(const Classifier& model, const Image& image, int label,
                                   const PerturbationBudget& blur_budget, const PerturbationBudget& additive_budget,
                                   const SigmaSource& sigma_source, const BlurSpec& spec, const RhoBounds& bounds = {});

}  // namespace advblur
