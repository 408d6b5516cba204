#pragma once

#include <array>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "nn.hpp"
#include "tensor.hpp"

namespace advblur {

inline constexpr int kLabelReal = 0;
inline constexpr int kLabelFake = 1;

using Logits = std::array<double, 2>;

/// Cross-entropy of two logits against a {0,1} label.
double cross_entropy(const Logits& z, int label);
/// dL/dlogits for cross_entropy.
Logits cross_entropy_grad(const Logits& z, int label);
/// Softmax probability of the fake class.
double fake_probability(const Logits& z);
/// Mean cross-entropy over a batch of logits.
double mean_cross_entropy(std::span<const Logits> logits, std::span<const int> labels);

void validate_label(int label);

/// Anything an attack can be run against: logits plus input gradients.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual Logits logits(const Tensor& x) const = 0;
  /// Per-sample loss; writes dL/dx into `grad` when non-null.
  virtual double loss_and_input_grad(const Tensor& x, int label, Tensor* grad) const = 0;
  virtual std::string id() const = 0;
};

struct DetectorArch {
  std::string backbone = "small_cnn";
  int channels = 3;
  int height = 64;
  int width = 64;
  std::vector<int> widths{8, 16, 32, 32};
  double leaky_slope = 0.2;
  double input_mean = 0.5;   // preprocessing: (x - mean) * scale
  double input_scale = 2.0;

  nlohmann::json to_json() const;
  static DetectorArch from_json(const nlohmann::json& j);
};

/// Backbones map an image to two logits; registered by name.
using BackboneFactory = std::function<nn::Sequential(const DetectorArch&)>;
void register_backbone(const std::string& name, BackboneFactory factory);
nn::Sequential make_backbone(const DetectorArch& arch);

/// Binary forgery classifier: backbone + cross-entropy loss.
class Detector final : public Classifier {
 public:
  explicit Detector(DetectorArch arch, std::string id = "detector");

  void init(unsigned long long seed);

  const DetectorArch& arch() const { return arch_; }
  std::vector<double>& params() { return net_.params(); }
  const std::vector<double>& params() const { return net_.params(); }
  std::size_t num_params() const { return net_.num_params(); }
  const nn::Network& network() const { return net_; }

  Logits logits(const Tensor& x) const override;
  double loss_and_input_grad(const Tensor& x, int label, Tensor* grad) const override;
  std::string id() const override { return id_; }
  void set_id(std::string id) { id_ = std::move(id); }

  /// Mean cross-entropy over the batch.
  double loss(std::span<const Tensor> batch, std::span<const int> labels) const;

  /// Adds weight * d(mean loss)/dtheta into `grad`; returns the mean loss.
  double accumulate_param_grad(std::span<const Tensor> batch, std::span<const int> labels, double weight,
                               std::span<double> grad) const;

  /// Fake-class probabilities.
  std::vector<double> scores(std::span<const Tensor> batch) const;

 private:
  DetectorArch arch_;
  nn::Network net_;
  std::string id_;
};

}  // namespace advblur
