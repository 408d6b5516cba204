#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace advblur {

struct OptimSettings {
  std::string kind = "radam";
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-4;
  int decay_every = 10;       // epochs
  double decay_factor = 0.1;

  /// Step-decayed learning rate for a zero-based epoch index.
  double lr_at_epoch(int epoch) const;
  void validate() const;
};

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  /// Descends along `grad`; callers negate the gradient for ascent.
  virtual void step(std::span<double> params, std::span<const double> grad, double lr) = 0;
  virtual nlohmann::json state() const = 0;
  virtual void load_state(const nlohmann::json& state) = 0;
};

/// Rectified Adam with L2 weight decay folded into the gradient.
class RAdam final : public Optimizer {
 public:
  RAdam(std::size_t n, double beta1, double beta2, double eps, double weight_decay);

  void step(std::span<double> params, std::span<const double> grad, double lr) override;
  nlohmann::json state() const override;
  void load_state(const nlohmann::json& state) override;
  long long steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_, weight_decay_;
  long long t_ = 0;
  std::vector<double> m_, v_;
};

/// Plain gradient descent; used by tests that need an exactly linear update.
class Sgd final : public Optimizer {
 public:
  explicit Sgd(double weight_decay = 0.0) : weight_decay_(weight_decay) {}
  void step(std::span<double> params, std::span<const double> grad, double lr) override;
  nlohmann::json state() const override { return nlohmann::json::object(); }
  void load_state(const nlohmann::json&) override {}

 private:
  double weight_decay_;
};

std::unique_ptr<Optimizer> make_optimizer(const OptimSettings& settings, std::size_t num_params);

}  // namespace advblur
