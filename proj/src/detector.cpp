#include "detector.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "errors.hpp"
#include "jsonutil.hpp"

namespace advblur {

void validate_label(int label) {
  require(label == kLabelReal || label == kLabelFake, ErrorKind::validation,
          "label must be 0 (real) or 1 (fake), got " + std::to_string(label));
}

double cross_entropy(const Logits& z, int label) {
  validate_label(label);
  const double m = std::max(z[0], z[1]);
  const double lse = m + std::log(std::exp(z[0] - m) + std::exp(z[1] - m));
  return lse - z[label];
}

Logits cross_entropy_grad(const Logits& z, int label) {
  validate_label(label);
  const double p1 = fake_probability(z);
  Logits g{1.0 - p1, p1};
  g[label] -= 1.0;
  return g;
}

double fake_probability(const Logits& z) { return 1.0 / (1.0 + std::exp(z[0] - z[1])); }

double mean_cross_entropy(std::span<const Logits> logits, std::span<const int> labels) {
  require(logits.size() == labels.size() && !logits.empty(), ErrorKind::validation,
          "logits/labels size mismatch or empty batch");
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) s += cross_entropy(logits[i], labels[i]);
  return s / double(logits.size());
}

nlohmann::json DetectorArch::to_json() const {
  return {{"backbone", backbone}, {"channels", channels}, {"height", height},     {"width", width},
          {"widths", widths},     {"leaky_slope", leaky_slope}, {"input_mean", input_mean}, {"input_scale", input_scale}};
}

DetectorArch DetectorArch::from_json(const nlohmann::json& j) {
  DetectorArch a;
  StrictObject o(j, "detector");
  o.get("backbone", a.backbone);
  o.get("channels", a.channels);
  o.get("height", a.height);
  o.get("width", a.width);
  o.get("widths", a.widths);
  o.get("leaky_slope", a.leaky_slope);
  o.get("input_mean", a.input_mean);
  o.get("input_scale", a.input_scale);
  o.finish();
  return a;
}

namespace {

// Stride-2 3x3 conv blocks, global average pool, linear head with 2 logits.
nn::Sequential small_cnn(const DetectorArch& a) {
  require(!a.widths.empty(), ErrorKind::config, "small_cnn needs at least one conv block");
  nn::Sequential s;
  s.add<nn::Affine>(a.input_mean, a.input_scale);
  int cin = a.channels;
  for (int width : a.widths) {
    s.add<nn::Conv2d>(cin, width, 3, 2, 1);
    s.add<nn::LeakyRelu>(a.leaky_slope);
    cin = width;
  }
  s.add<nn::GlobalAvgPool>();
  s.add<nn::Linear>(cin, 2);
  return s;
}

std::map<std::string, BackboneFactory>& registry() {
  static std::map<std::string, BackboneFactory> r{{"small_cnn", small_cnn}};
  return r;
}

std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

void register_backbone(const std::string& name, BackboneFactory factory) {
  std::lock_guard lock(registry_mutex());
  registry()[name] = std::move(factory);
}

nn::Sequential make_backbone(const DetectorArch& arch) {
  BackboneFactory f;
  {
    std::lock_guard lock(registry_mutex());
    auto it = registry().find(arch.backbone);
    require(it != registry().end(), ErrorKind::config, "unknown backbone '" + arch.backbone + "'");
    f = it->second;
  }
  return f(arch);
}

Detector::Detector(DetectorArch arch, std::string id)
    : arch_(std::move(arch)), net_(make_backbone(arch_), nn::Shape{arch_.channels, arch_.height, arch_.width}),
      id_(std::move(id)) {
  const nn::Shape out = net_.output_shape();
  require(out == nn::Shape{2, 1, 1}, ErrorKind::config, "backbone must emit exactly two logits");
}

void Detector::init(unsigned long long seed) {
  nn::Rng rng(seed);
  net_.init(rng);
}

Logits Detector::logits(const Tensor& x) const {
  nn::Trace trace;
  const Tensor y = net_.forward(x, trace);
  return {y.data[0], y.data[1]};
}

double Detector::loss_and_input_grad(const Tensor& x, int label, Tensor* grad) const {
  nn::Trace trace;
  const Tensor y = net_.forward(x, trace);
  const Logits z{y.data[0], y.data[1]};
  const double l = cross_entropy(z, label);
  if (grad != nullptr) {
    const Logits gz = cross_entropy_grad(z, label);
    Tensor dy(2, 1, 1);
    dy.data = {gz[0], gz[1]};
    std::vector<double> scratch(net_.num_params(), 0.0);
    *grad = net_.backward(trace, dy, scratch);
  }
  return l;
}

double Detector::loss(std::span<const Tensor> batch, std::span<const int> labels) const {
  std::vector<Logits> z;
  z.reserve(batch.size());
  for (const Tensor& x : batch) z.push_back(logits(x));
  return mean_cross_entropy(z, labels);
}

double Detector::accumulate_param_grad(std::span<const Tensor> batch, std::span<const int> labels, double weight,
                                       std::span<double> grad) const {
  require(batch.size() == labels.size() && !batch.empty(), ErrorKind::validation, "batch/labels mismatch");
  const double inv_n = 1.0 / double(batch.size());
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    nn::Trace trace;
    const Tensor y = net_.forward(batch[i], trace);
    const Logits z{y.data[0], y.data[1]};
    total += cross_entropy(z, labels[i]);
    const Logits gz = cross_entropy_grad(z, labels[i]);
    Tensor dy(2, 1, 1);
    dy.data = {weight * inv_n * gz[0], weight * inv_n * gz[1]};
    net_.backward(trace, dy, grad);
  }
  return total * inv_n;
}

std::vector<double> Detector::scores(std::span<const Tensor> batch) const {
  std::vector<double> s;
  s.reserve(batch.size());
  for (const Tensor& x : batch) s.push_back(fake_probability(logits(x)));
  return s;
}

}  // namespace advblur
