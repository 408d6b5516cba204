#include "nn.hpp"

#include <Eigen/Core>
#include <cmath>

#include "errors.hpp"

namespace advblur::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

// He-uniform bound sqrt(6 / fan_in), scaled by `gain`.
void kaiming_uniform(std::span<double> w, int fan_in, double gain, Rng& rng) {
  const double bound = gain * std::sqrt(6.0 / double(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : w) v = dist(rng);
}

}  // namespace

// ---- Conv2d ---------------------------------------------------------------

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride, int padding, double init_gain)
    : cin_(in_channels), cout_(out_channels), k_(kernel), stride_(stride), pad_(padding), init_gain_(init_gain) {
  require(cin_ > 0 && cout_ > 0 && k_ > 0 && stride_ > 0 && pad_ >= 0, ErrorKind::validation,
          "invalid convolution geometry");
}

Shape Conv2d::out_shape(const Shape& in) const {
  require(in.c == cin_, ErrorKind::shape,
          "conv expects " + std::to_string(cin_) + " channels, got " + std::to_string(in.c));
  const int ho = (in.h + 2 * pad_ - k_) / stride_ + 1;
  const int wo = (in.w + 2 * pad_ - k_) / stride_ + 1;
  require(ho > 0 && wo > 0, ErrorKind::shape, "input too small for convolution");
  return {cout_, ho, wo};
}

std::size_t Conv2d::num_params() const { return std::size_t(cout_) * cin_ * k_ * k_ + cout_; }

void Conv2d::init(std::span<double> params, Rng& rng) const {
  kaiming_uniform(params.first(bias_offset()), cin_ * k_ * k_, init_gain_, rng);
  for (double& b : params.subspan(bias_offset())) b = 0.0;
}

Tensor Conv2d::forward(std::span<const double> params, const Tensor& x, Trace& trace) const {
  const Shape os = out_shape({x.c, x.h, x.w});
  const int kk = cin_ * k_ * k_;
  const int npix = os.h * os.w;
  trace.scratch.assign(std::size_t(kk) * npix, 0.0);
  MapMat col(trace.scratch.data(), kk, npix);
  for (int ci = 0; ci < cin_; ++ci)
    for (int ki = 0; ki < k_; ++ki)
      for (int kj = 0; kj < k_; ++kj) {
        double* row = trace.scratch.data() + std::size_t((ci * k_ + ki) * k_ + kj) * npix;
        for (int oi = 0; oi < os.h; ++oi) {
          const int ii = oi * stride_ - pad_ + ki;
          if (ii < 0 || ii >= x.h) continue;
          for (int oj = 0; oj < os.w; ++oj) {
            const int jj = oj * stride_ - pad_ + kj;
            if (jj >= 0 && jj < x.w) row[oi * os.w + oj] = x.at(ci, ii, jj);
          }
        }
      }
  Tensor y(os.c, os.h, os.w);
  ConstMapMat weights(params.data(), cout_, kk);
  MapMat out(y.data.data(), cout_, npix);
  out.noalias() = weights * col;
  for (int co = 0; co < cout_; ++co) out.row(co).array() += params[bias_offset() + co];
  return y;
}

Tensor Conv2d::backward(std::span<const double> params, const Tensor& x, const Tensor& y, const Tensor& dy,
                        Trace& trace, std::span<double> grad) const {
  const int kk = cin_ * k_ * k_;
  const int npix = y.h * y.w;
  ConstMapMat col(trace.scratch.data(), kk, npix);
  ConstMapMat gout(dy.data.data(), cout_, npix);
  MapMat gw(grad.data(), cout_, kk);
  gw.noalias() += gout * col.transpose();
  for (int co = 0; co < cout_; ++co) grad[bias_offset() + co] += gout.row(co).sum();

  ConstMapMat weights(params.data(), cout_, kk);
  RowMat gcol = weights.transpose() * gout;
  Tensor dx(x.c, x.h, x.w);
  for (int ci = 0; ci < cin_; ++ci)
    for (int ki = 0; ki < k_; ++ki)
      for (int kj = 0; kj < k_; ++kj) {
        const double* row = gcol.data() + std::size_t((ci * k_ + ki) * k_ + kj) * npix;
        for (int oi = 0; oi < y.h; ++oi) {
          const int ii = oi * stride_ - pad_ + ki;
          if (ii < 0 || ii >= x.h) continue;
          for (int oj = 0; oj < y.w; ++oj) {
            const int jj = oj * stride_ - pad_ + kj;
            if (jj >= 0 && jj < x.w) dx.at(ci, ii, jj) += row[oi * y.w + oj];
          }
        }
      }
  return dx;
}

nlohmann::json Conv2d::describe() const {
  return {{"type", "conv2d"}, {"in", cin_}, {"out", cout_}, {"kernel", k_}, {"stride", stride_}, {"padding", pad_}};
}

// ---- Linear ---------------------------------------------------------------

Linear::Linear(int in_features, int out_features) : in_(in_features), out_(out_features) {
  require(in_ > 0 && out_ > 0, ErrorKind::validation, "invalid linear layer size");
}

Shape Linear::out_shape(const Shape& in) const {
  require(in.c * in.h * in.w == in_, ErrorKind::shape, "linear layer input size mismatch");
  return {out_, 1, 1};
}

std::size_t Linear::num_params() const { return std::size_t(in_) * out_ + out_; }

void Linear::init(std::span<double> params, Rng& rng) const {
  kaiming_uniform(params.first(std::size_t(in_) * out_), in_, 1.0 / std::sqrt(2.0), rng);
  for (double& b : params.subspan(std::size_t(in_) * out_)) b = 0.0;
}

Tensor Linear::forward(std::span<const double> params, const Tensor& x, Trace&) const {
  Tensor y(out_, 1, 1);
  for (int o = 0; o < out_; ++o) {
    double acc = params[std::size_t(in_) * out_ + o];
    const double* wrow = params.data() + std::size_t(o) * in_;
    for (int i = 0; i < in_; ++i) acc += wrow[i] * x.data[i];
    y.data[o] = acc;
  }
  return y;
}

Tensor Linear::backward(std::span<const double> params, const Tensor& x, const Tensor&, const Tensor& dy,
                        Trace&, std::span<double> grad) const {
  Tensor dx(x.c, x.h, x.w);
  for (int o = 0; o < out_; ++o) {
    const double g = dy.data[o];
    const double* wrow = params.data() + std::size_t(o) * in_;
    double* gw = grad.data() + std::size_t(o) * in_;
    for (int i = 0; i < in_; ++i) {
      gw[i] += g * x.data[i];
      dx.data[i] += g * wrow[i];
    }
    grad[std::size_t(in_) * out_ + o] += g;
  }
  return dx;
}

nlohmann::json Linear::describe() const { return {{"type", "linear"}, {"in", in_}, {"out", out_}}; }

// ---- Elementwise / pooling -------------------------------------------------

Tensor LeakyRelu::forward(std::span<const double>, const Tensor& x, Trace&) const {
  Tensor y = x;
  for (double& v : y.data)
    if (v < 0.0) v *= slope_;
  return y;
}

Tensor LeakyRelu::backward(std::span<const double>, const Tensor& x, const Tensor&, const Tensor& dy, Trace&,
                           std::span<double>) const {
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i)
    if (x.data[i] < 0.0) dx.data[i] *= slope_;
  return dx;
}

nlohmann::json LeakyRelu::describe() const { return {{"type", "leaky_relu"}, {"slope", slope_}}; }

Tensor GlobalAvgPool::forward(std::span<const double>, const Tensor& x, Trace&) const {
  Tensor y(x.c, 1, 1);
  for (int ch = 0; ch < x.c; ++ch) {
    double s = 0.0;
    for (double v : x.plane(ch)) s += v;
    y.data[ch] = s / double(x.plane_size());
  }
  return y;
}

Tensor GlobalAvgPool::backward(std::span<const double>, const Tensor& x, const Tensor&, const Tensor& dy, Trace&,
                               std::span<double>) const {
  Tensor dx(x.c, x.h, x.w);
  for (int ch = 0; ch < x.c; ++ch) {
    const double g = dy.data[ch] / double(x.plane_size());
    for (double& v : dx.plane(ch)) v = g;
  }
  return dx;
}

nlohmann::json GlobalAvgPool::describe() const { return {{"type", "global_avg_pool"}}; }

Tensor Upsample2x::forward(std::span<const double>, const Tensor& x, Trace&) const {
  Tensor y(x.c, x.h * 2, x.w * 2);
  for (int ch = 0; ch < x.c; ++ch)
    for (int i = 0; i < y.h; ++i)
      for (int j = 0; j < y.w; ++j) y.at(ch, i, j) = x.at(ch, i / 2, j / 2);
  return y;
}

Tensor Upsample2x::backward(std::span<const double>, const Tensor& x, const Tensor& y, const Tensor& dy, Trace&,
                            std::span<double>) const {
  Tensor dx(x.c, x.h, x.w);
  for (int ch = 0; ch < x.c; ++ch)
    for (int i = 0; i < y.h; ++i)
      for (int j = 0; j < y.w; ++j) dx.at(ch, i / 2, j / 2) += dy.at(ch, i, j);
  return dx;
}

nlohmann::json Upsample2x::describe() const { return {{"type", "upsample2x"}}; }

Tensor Affine::forward(std::span<const double>, const Tensor& x, Trace&) const {
  Tensor y = x;
  for (double& v : y.data) v = (v - mean_) * scale_;
  return y;
}

Tensor Affine::backward(std::span<const double>, const Tensor&, const Tensor&, const Tensor& dy, Trace&,
                        std::span<double>) const {
  Tensor dx = dy;
  for (double& v : dx.data) v *= scale_;
  return dx;
}

nlohmann::json Affine::describe() const { return {{"type", "affine"}, {"mean", mean_}, {"scale", scale_}}; }

Tensor ScaledSigmoid::forward(std::span<const double>, const Tensor& x, Trace&) const {
  Tensor y = x;
  for (double& v : y.data) v = lo_ + (hi_ - lo_) / (1.0 + std::exp(-v));
  return y;
}

Tensor ScaledSigmoid::backward(std::span<const double>, const Tensor&, const Tensor& y, const Tensor& dy, Trace&,
                               std::span<double>) const {
  Tensor dx = dy;
  const double range = hi_ - lo_;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    const double s = (y.data[i] - lo_) / range;
    dx.data[i] *= range * s * (1.0 - s);
  }
  return dx;
}

double ScaledSigmoid::inverse(double target) const {
  require(target > lo_ && target < hi_, ErrorKind::domain, "target outside the sigmoid range");
  const double s = (target - lo_) / (hi_ - lo_);
  return std::log(s / (1.0 - s));
}

nlohmann::json ScaledSigmoid::describe() const { return {{"type", "scaled_sigmoid"}, {"lo", lo_}, {"hi", hi_}}; }

// ---- Containers -------------------------------------------------------------

void Sequential::add_layer(std::unique_ptr<Layer> layer) {
  offsets_.push_back(param_count_);
  param_count_ += layer->num_params();
  layers_.push_back(std::move(layer));
}

Shape Sequential::out_shape(const Shape& in) const {
  Shape s = in;
  for (const auto& l : layers_) s = l->out_shape(s);
  return s;
}

void Sequential::init(std::span<double> params, Rng& rng) const {
  for (std::size_t i = 0; i < layers_.size(); ++i)
    layers_[i]->init(params.subspan(offsets_[i], layers_[i]->num_params()), rng);
}

Tensor Sequential::forward(std::span<const double> params, const Tensor& x, Trace& trace) const {
  trace.acts.resize(layers_.size() + 1);
  trace.children.resize(layers_.size());
  trace.acts[0] = x;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    trace.acts[i + 1] =
        layers_[i]->forward(params.subspan(offsets_[i], layers_[i]->num_params()), trace.acts[i], trace.children[i]);
  return trace.acts.back();
}

Tensor Sequential::backward(std::span<const double> params, const Tensor&, const Tensor&, const Tensor& dy,
                            Trace& trace, std::span<double> grad) const {
  Tensor g = dy;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const std::size_t n = layers_[i]->num_params();
    g = layers_[i]->backward(params.subspan(offsets_[i], n), trace.acts[i], trace.acts[i + 1], g,
                             trace.children[i], grad.subspan(offsets_[i], n));
  }
  return g;
}

nlohmann::json Sequential::describe() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : layers_) layers.push_back(l->describe());
  return {{"type", "sequential"}, {"layers", layers}};
}

Tensor Residual::forward(std::span<const double> params, const Tensor& x, Trace& trace) const {
  trace.children.resize(1);
  Tensor y = body_.forward(params, x, trace.children[0]);
  require(y.same_shape(x), ErrorKind::shape, "residual body must preserve shape");
  for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += x.data[i];
  return y;
}

Tensor Residual::backward(std::span<const double> params, const Tensor& x, const Tensor& y, const Tensor& dy,
                          Trace& trace, std::span<double> grad) const {
  Tensor dx = body_.backward(params, x, y, dy, trace.children[0], grad);
  for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += dy.data[i];
  return dx;
}

nlohmann::json Residual::describe() const { return {{"type", "residual"}, {"body", body_.describe()}}; }

Network::Network(Sequential body, Shape input) : body_(std::move(body)), input_(input) {
  body_.out_shape(input_);
  params_.assign(body_.num_params(), 0.0);
}

void Network::init(Rng& rng) { body_.init(params_, rng); }

Tensor Network::forward(const Tensor& x, Trace& trace) const {
  require(x.c == input_.c && x.h == input_.h && x.w == input_.w, ErrorKind::shape,
          "network expects " + std::to_string(input_.h) + "x" + std::to_string(input_.w) + "x" +
              std::to_string(input_.c) + " input, got " + x.shape_string());
  return body_.forward(params_, x, trace);
}

Tensor Network::backward(Trace& trace, const Tensor& dy, std::span<double> grad) const {
  require(grad.size() == params_.size(), ErrorKind::shape, "gradient buffer size mismatch");
  return body_.backward(params_, trace.acts.front(), trace.acts.back(), dy, trace, grad);
}

}  // namespace advblur::nn
