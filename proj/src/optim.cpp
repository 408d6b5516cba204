#include "optim.hpp"

#include <cmath>

#include "errors.hpp"

namespace advblur {

double OptimSettings::lr_at_epoch(int epoch) const {
  if (decay_every <= 0) return lr;
  return lr * std::pow(decay_factor, double(epoch / decay_every));
}

void OptimSettings::validate() const {
  require(kind == "radam" || kind == "sgd", ErrorKind::config, "unknown optimizer '" + kind + "'");
  require(lr >= 0.0 && std::isfinite(lr), ErrorKind::config, "learning rate must be finite and >= 0");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, ErrorKind::config, "betas must lie in [0,1)");
  require(eps > 0.0, ErrorKind::config, "eps must be positive");
  require(weight_decay >= 0.0, ErrorKind::config, "weight decay must be >= 0");
  require(decay_factor > 0.0, ErrorKind::config, "decay factor must be positive");
}

RAdam::RAdam(std::size_t n, double beta1, double beta2, double eps, double weight_decay)
    : beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay), m_(n, 0.0), v_(n, 0.0) {}

void RAdam::step(std::span<double> params, std::span<const double> grad, double lr) {
  require(params.size() == m_.size() && grad.size() == m_.size(), ErrorKind::shape, "optimizer size mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, double(t_));
  const double b2t = std::pow(beta2_, double(t_));
  const double bc2 = 1.0 - b2t;
  const double rho_inf = 2.0 / (1.0 - beta2_) - 1.0;
  const double rho_t = rho_inf - 2.0 * double(t_) * b2t / bc2;
  const bool rectify = rho_t > 5.0;
  const double rect =
      rectify ? std::sqrt((rho_t - 4.0) * (rho_t - 2.0) * rho_inf / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t)) : 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i] + weight_decay_ * params[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
    const double m_hat = m_[i] / bc1;
    if (rectify) {
      const double adaptive = std::sqrt(bc2) / (std::sqrt(v_[i]) + eps_);
      params[i] -= lr * m_hat * adaptive * rect;
    } else {
      params[i] -= lr * m_hat;
    }
  }
}

nlohmann::json RAdam::state() const {
  return {{"kind", "radam"}, {"t", t_}, {"m", m_}, {"v", v_}};
}

void RAdam::load_state(const nlohmann::json& state) {
  require(state.value("kind", "") == "radam", ErrorKind::validation, "optimizer state is not RAdam");
  auto m = state.at("m").get<std::vector<double>>();
  auto v = state.at("v").get<std::vector<double>>();
  require(m.size() == m_.size() && v.size() == v_.size(), ErrorKind::shape, "optimizer state size mismatch");
  t_ = state.at("t").get<long long>();
  m_ = std::move(m);
  v_ = std::move(v);
}

void Sgd::step(std::span<double> params, std::span<const double> grad, double lr) {
  require(params.size() == grad.size(), ErrorKind::shape, "optimizer size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * (grad[i] + weight_decay_ * params[i]);
}

std::unique_ptr<Optimizer> make_optimizer(const OptimSettings& s, std::size_t num_params) {
  s.validate();
  if (s.kind == "sgd") return std::make_unique<Sgd>(s.weight_decay);
  return std::make_unique<RAdam>(num_params, s.beta1, s.beta2, s.eps, s.weight_decay);
}

}  // namespace advblur
