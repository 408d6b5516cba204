#pragma once

// Minimal layer library with explicit reverse-mode passes.
//
// Parameters live outside the layers in one flat vector owned by Network, so
// a frozen model can be shared read-only while per-call activations are kept
// in a Trace owned by the caller.

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tensor.hpp"

namespace advblur::nn {

using Rng = std::mt19937_64;

struct Shape {
  int c = 0;
  int h = 0;
  int w = 0;
  bool operator==(const Shape&) const = default;
};

/// Activations and scratch recorded by one forward pass.
struct Trace {
  std::vector<Tensor> acts;
  std::vector<Trace> children;
  std::vector<double> scratch;
};

class Layer {
 public:
  virtual ~Layer() = default;

  virtual Shape out_shape(const Shape& in) const = 0;
  virtual std::size_t num_params() const { return 0; }
  virtual void init(std::span<double> /*params*/, Rng& /*rng*/) const {}

  virtual Tensor forward(std::span<const double> params, const Tensor& x, Trace& trace) const = 0;

  /// Returns dL/dx and accumulates dL/dparams into `grad`.
  virtual Tensor backward(std::span<const double> params, const Tensor& x, const Tensor& y,
                          const Tensor& dy, Trace& trace, std::span<double> grad) const = 0;

  virtual nlohmann::json describe() const = 0;
};

class Conv2d final : public Layer {
 public:
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int padding, double init_gain = 1.0);

  Shape out_shape(const Shape& in) const override;
  std::size_t num_params() const override;
  void init(std::span<double> params, Rng& rng) const override;
  Tensor forward(std::span<const double> params, const Tensor& x, Trace& trace) const override;
  Tensor backward(std::span<const double> params, const Tensor& x, const Tensor& y, const Tensor& dy,
                  Trace& trace, std::span<double> grad) const override;
  nlohmann::json describe() const override;

  /// Offset of the bias block inside this layer's parameter span.
  std::size_t bias_offset() const { return std::size_t(cout_) * cin_ * k_ * k_; }

 private:
  int cin_, cout_, k_, stride_, pad_;
  double init_gain_;
};

class Linear final : public Layer {
 public:
  Linear(int in_features, int out_features);

  Shape out_shape(const Shape& in) const override;
  std::size_t num_params() const override;
  void init(std::span<double> params, Rng& rng) const override;
  Tensor forward(std::span<const double> params, const Tensor& x, Trace& trace) const override;
  Tensor backward(std::span<const double> params, const Tensor& x, const Tensor& y, const Tensor& dy,
                  Trace& trace, std::span<double> grad) const override;
  nlohmann::json describe() const override;

 private:
  int in_, out_;
};

class LeakyRelu final : public Layer {
 public:
  explicit LeakyRelu(double slope) : slope_(slope) {}
  Shape out_shape(const Shape& in) const override { return in; }
  Tensor forward(std::span<const double> params, const Tensor& x, Trace& trace) const override;
  Tensor backward(std::span<const double> params, const Tensor& x, const Tensor& y, const Tensor& dy,
                  Trace& trace, std::span<double> grad) const override;
  nlohmann::json describe() const override;

 private:
  double slope_;
};

class GlobalAvgPool final : public Layer {
 public:
  Shape out_shape(const Shape& in) const override { return {in.c, 1, 1}; }
  Tensor forward(std::span<const double> params, const Tensor& x, Trace& trace) const override;
  Tensor backward(std::span<const double> params, const Tensor& x, const Tensor& y, const Tensor& dy,
                  Trace& trace, std::span<double> grad) const override;
  nlohmann::json describe() const override;
};

/// Nearest-neighbour 2x upsampling.
class Upsample2x final : public Layer {
 public:
  Shape out_shape(const Shape& in) const override { return {in.c, in.h * 2, in.w * 2}; }
  Tensor forward(std::span<const double> params, const Tensor& x, Trace& trace) const override;
  Tensor backward(std::span<const double> params, const Tensor& x, const Tensor& y, const Tensor& dy,
                  Trace& trace, std::span<double> grad) const override;
  nlohmann::json describe() const override;
};

/// Fixed (x - mean) * scale input preprocessing.
class Affine final : public Layer {
 public:
  Affine(double mean, double scale) : mean_(mean), scale_(scale) {}
  Shape out_shape(const Shape& in) const override { return in; }
  Tensor forward(std::span<const double> params, const Tensor& x, Trace& trace) const override;
  Tensor backward(std::span<const double> params, const Tensor& x, const Tensor& y, const Tensor& dy,
                  Trace& trace, std::span<double> grad) const override;
  nlohmann::json describe() const override;

 private:
  double mean_, scale_;
};

/// lo + (hi - lo) * sigmoid(x), elementwise.
class ScaledSigmoid final : public Layer {
 public:
  ScaledSigmoid(double lo, double hi) : lo_(lo), hi_(hi) {}
  Shape out_shape(const Shape& in) const override { return in; }
  Tensor forward(std::span<const double> params, const Tensor& x, Trace& trace) const override;
  Tensor backward(std::span<const double> params, const Tensor& x, const Tensor& y, const Tensor& dy,
                  Trace& trace, std::span<double> grad) const override;
  nlohmann::json describe() const override;

  /// Pre-activation value that maps to `target`.
  double inverse(double target) const;

 private:
  double lo_, hi_;
};

class Sequential final : public Layer {
 public:
  Sequential() = default;
  Sequential(Sequential&&) = default;
  Sequential& operator=(Sequential&&) = default;

  template <typename L, typename... Args>
  L& add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    offsets_.push_back(param_count_);
    param_count_ += ref.num_params();
    layers_.push_back(std::move(layer));
    return ref;
  }
  void add_layer(std::unique_ptr<Layer> layer);

  std::size_t size() const { return layers_.size(); }
  const Layer& layer(std::size_t i) const { return *layers_[i]; }
  std::size_t offset(std::size_t i) const { return offsets_[i]; }

  Shape out_shape(const Shape& in) const override;
  std::size_t num_params() const override { return param_count_; }
  void init(std::span<double> params, Rng& rng) const override;
  Tensor forward(std::span<const double> params, const Tensor& x, Trace& trace) const override;
  Tensor backward(std::span<const double> params, const Tensor& x, const Tensor& y, const Tensor& dy,
                  Trace& trace, std::span<double> grad) const override;
  nlohmann::json describe() const override;

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<std::size_t> offsets_;
  std::size_t param_count_ = 0;
};

/// y = x + body(x); body must preserve shape.
class Residual final : public Layer {
 public:
  explicit Residual(Sequential body) : body_(std::move(body)) {}
  Shape out_shape(const Shape& in) const override { return in; }
  std::size_t num_params() const override { return body_.num_params(); }
  void init(std::span<double> params, Rng& rng) const override { body_.init(params, rng); }
  Tensor forward(std::span<const double> params, const Tensor& x, Trace& trace) const override;
  Tensor backward(std::span<const double> params, const Tensor& x, const Tensor& y, const Tensor& dy,
                  Trace& trace, std::span<double> grad) const override;
  nlohmann::json describe() const override;

 private:
  Sequential body_;
};

/// A Sequential together with its flat parameter vector.
class Network {
 public:
  Network(Sequential body, Shape input);

  const Shape& input_shape() const { return input_; }
  Shape output_shape() const { return body_.out_shape(input_); }
  const Sequential& body() const { return body_; }

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::size_t num_params() const { return params_.size(); }

  void init(Rng& rng);
  Tensor forward(const Tensor& x, Trace& trace) const;
  /// Returns dL/dx; accumulates dL/dtheta into `grad` (sized num_params()).
  Tensor backward(Trace& trace, const Tensor& dy, std::span<double> grad) const;

 private:
  Sequential body_;
  Shape input_;
  std::vector<double> params_;
};

}  // namespace advblur::nn
