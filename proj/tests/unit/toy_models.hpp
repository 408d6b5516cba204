#pragma once

#include <cmath>

#include "detector.hpp"

namespace testutil {

/// Logistic model on pixels: fake logit w.x + b, real logit 0.
class Logistic final : public advblur::Classifier {
 public:
  Logistic(advblur::Tensor w, double b) : w_(std::move(w)), b_(b) {}

  advblur::Logits logits(const advblur::Tensor& x) const override {
    double z = b_;
    for (std::size_t i = 0; i < x.size(); ++i) z += w_.data[i] * x.data[i];
    return {0.0, z};
  }

  double loss_and_input_grad(const advblur::Tensor& x, int label, advblur::Tensor* grad) const override {
    const advblur::Logits z = logits(x);
    const double p = 1.0 / (1.0 + std::exp(-z[1]));
    if (grad) {
      *grad = advblur::Tensor(x.c, x.h, x.w);
      for (std::size_t i = 0; i < x.size(); ++i) grad->data[i] = (p - label) * w_.data[i];
    }
    return oracle::softmax_xent(z[0], z[1], label);
  }

  std::string id() const override { return "logistic"; }
  const advblur::Tensor& weights() const { return w_; }

 private:
  advblur::Tensor w_;
  double b_;
};

inline advblur::DetectorArch small_arch(int size = 16, int channels = 3) {
  advblur::DetectorArch a;
  a.height = a.width = size;
  a.channels = channels;
  return a;
}

}  // namespace testutil
