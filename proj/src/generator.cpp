#include "generator.hpp"

#include <cmath>

#include "errors.hpp"
#include "jsonutil.hpp"

namespace advblur {

nlohmann::json GeneratorArch::to_json() const {
  return {{"channels", channels},       {"height", height},
          {"width", width},             {"base_width", base_width},
          {"downsamples", downsamples}, {"res_blocks", res_blocks},
          {"leaky_slope", leaky_slope}, {"initial_sigma", initial_sigma},
          {"head_gain", head_gain},     {"rho_min", bounds.rho_min},
          {"rho_max", bounds.rho_max}};
}

GeneratorArch GeneratorArch::from_json(const nlohmann::json& j) {
  GeneratorArch a;
  StrictObject o(j, "generator");
  o.get("channels", a.channels);
  o.get("height", a.height);
  o.get("width", a.width);
  o.get("base_width", a.base_width);
  o.get("downsamples", a.downsamples);
  o.get("res_blocks", a.res_blocks);
  o.get("leaky_slope", a.leaky_slope);
  o.get("initial_sigma", a.initial_sigma);
  o.get("head_gain", a.head_gain);
  o.get("rho_min", a.bounds.rho_min);
  o.get("rho_max", a.bounds.rho_max);
  o.finish();
  return a;
}

namespace {

int level_width(const GeneratorArch& a, int level) { return a.base_width * (level == 0 ? 1 : 2); }

nn::Sequential build_generator(const GeneratorArch& a) {
  require(a.base_width > 0 && a.downsamples >= 0 && a.res_blocks >= 0, ErrorKind::config,
          "invalid generator architecture");
  a.bounds.validate();
  nn::Sequential s;
  s.add<nn::Affine>(0.5, 2.0);
  s.add<nn::Conv2d>(a.channels, level_width(a, 0), 3, 1, 1);
  s.add<nn::LeakyRelu>(a.leaky_slope);
  for (int l = 0; l < a.downsamples; ++l) {
    s.add<nn::Conv2d>(level_width(a, l), level_width(a, l + 1), 3, 2, 1);
    s.add<nn::LeakyRelu>(a.leaky_slope);
  }
  const int inner = level_width(a, a.downsamples);
  for (int r = 0; r < a.res_blocks; ++r) {
    nn::Sequential body;
    body.add<nn::Conv2d>(inner, inner, 3, 1, 1);
    body.add<nn::LeakyRelu>(a.leaky_slope);
    body.add<nn::Conv2d>(inner, inner, 3, 1, 1, 0.5);
    s.add<nn::Residual>(std::move(body));
  }
  for (int l = a.downsamples; l > 0; --l) {
    s.add<nn::Upsample2x>();
    s.add<nn::Conv2d>(level_width(a, l), level_width(a, l - 1), 3, 1, 1);
    s.add<nn::LeakyRelu>(a.leaky_slope);
  }
  s.add<nn::Conv2d>(level_width(a, 0), 1, 3, 1, 1, a.head_gain);
  s.add<nn::ScaledSigmoid>(a.bounds.rho_min, a.bounds.rho_max);
  return s;
}

}  // namespace

Generator::Generator(GeneratorArch arch)
    : arch_(std::move(arch)), net_(build_generator(arch_), nn::Shape{arch_.channels, arch_.height, arch_.width}) {
  const int f = arch_.downsampling_factor();
  require(arch_.height % f == 0 && arch_.width % f == 0, ErrorKind::shape,
          "generator input " + std::to_string(arch_.height) + "x" + std::to_string(arch_.width) +
              " not divisible by downsampling factor " + std::to_string(f));
}

void Generator::init(unsigned long long seed) {
  nn::Rng rng(seed);
  net_.init(rng);
  // Output head bias chosen so a zero pre-activation maps to the initial sigma.
  const auto& body = net_.body();
  const std::size_t head = body.size() - 2;
  const auto& conv = dynamic_cast<const nn::Conv2d&>(body.layer(head));
  const auto& act = dynamic_cast<const nn::ScaledSigmoid&>(body.layer(head + 1));
  net_.params()[body.offset(head) + conv.bias_offset()] = act.inverse(1.0 / arch_.initial_sigma);
}

void Generator::check_image(const Tensor& image) const {
  require(image.c == arch_.channels && image.h == arch_.height && image.w == arch_.width, ErrorKind::shape,
          "generator built for " + std::to_string(arch_.height) + "x" + std::to_string(arch_.width) + "x" +
              std::to_string(arch_.channels) + ", got " + image.shape_string());
}

RhoMap Generator::generate_rho(const Tensor& image, nn::Trace& trace) const {
  check_image(image);
  RhoMap r{net_.forward(image, trace)};
  // Saturated sigmoid can land a rounding step outside the bounds.
  r.clamp(arch_.bounds);
  return r;
}

RhoMap Generator::generate_rho(const Tensor& image) const {
  nn::Trace trace;
  return generate_rho(image, trace);
}

void Generator::backward(nn::Trace& trace, const Tensor& d_rho, std::span<double> grad) const {
  net_.backward(trace, d_rho, grad);
}

SigmaMap generate_sigma(const Generator& generator, const Tensor& image) {
  return generator.generate_rho(image).to_sigma();
}

GameGenerators GameGenerators::single(Generator g) {
  GameGenerators s;
  s.gens_.push_back(std::move(g));
  return s;
}

GameGenerators GameGenerators::pair(Generator real, Generator fake) {
  GameGenerators s;
  s.gens_.push_back(std::move(real));
  s.gens_.push_back(std::move(fake));
  return s;
}

std::size_t GameGenerators::index_for(int label) const {
  validate_label(label);
  return is_pair() ? std::size_t(label == kLabelFake) : 0;
}

std::vector<Tensor> generate_adversarial(const GameGenerators& gens, const BlurSpec& spec, const GameBatch& batch) {
  require(batch.images.size() == batch.labels.size(), ErrorKind::validation, "batch/labels mismatch");
  std::vector<Tensor> out;
  out.reserve(batch.images.size());
  for (std::size_t i = 0; i < batch.images.size(); ++i) {
    const SigmaMap sigma = generate_sigma(gens.for_label(batch.labels[i]), batch.images[i]);
    out.push_back(blur_apply(batch.images[i], sigma, spec));
  }
  return out;
}

GenGradients generator_gradients(const Detector& detector, const GameGenerators& gens, const BlurSpec& spec,
                                 const GameBatch& batch) {
  require(batch.images.size() == batch.labels.size() && !batch.images.empty(), ErrorKind::validation,
          "empty or mismatched batch");
  GenGradients out;
  for (std::size_t g = 0; g < gens.size(); ++g) out.grads.emplace_back(gens.at(g).num_params(), 0.0);
  const double inv_n = 1.0 / double(batch.images.size());
  for (std::size_t i = 0; i < batch.images.size(); ++i) {
    const int label = batch.labels[i];
    const std::size_t gi = gens.index_for(label);
    const Generator& gen = gens.at(gi);
    nn::Trace trace;
    const RhoMap rho = gen.generate_rho(batch.images[i], trace);
    const SigmaMap sigma = rho.to_sigma();
    const Tensor adv = blur_apply(batch.images[i], sigma, spec);
    Tensor d_adv;
    const double l = detector.loss_and_input_grad(adv, label, &d_adv);
    require(std::isfinite(l), ErrorKind::numeric, "non-finite generator loss at batch index " + std::to_string(i));
    out.loss += l * inv_n;
    for (double& v : d_adv.data) v *= inv_n;
    const BlurGradients bg = blur_backward(batch.images[i], sigma, spec, d_adv);
    gen.backward(trace, sigma_grad_to_rho(bg.d_sigma, sigma), out.grads[gi]);
  }
  return out;
}

double gen_adv_step(const Detector& detector, GameGenerators& gens, std::span<const std::unique_ptr<Optimizer>> opts,
                    const BlurSpec& spec, const GameBatch& batch, double lr) {
  require(opts.size() == gens.size(), ErrorKind::validation, "one optimizer per generator required");
  GenGradients gg = generator_gradients(detector, gens, spec, batch);
  for (std::size_t g = 0; g < gens.size(); ++g) {
    require(all_finite(gg.grads[g]), ErrorKind::numeric,
            "non-finite generator gradient (generator " + std::to_string(g) + ", loss " + std::to_string(gg.loss) + ")");
    for (double& v : gg.grads[g]) v = -v;  // ascent
    opts[g]->step(gens.at(g).params(), gg.grads[g], lr);
  }
  return gg.loss;
}

GameLoss detector_game_gradient(const Detector& detector, const GameGenerators& gens, const BlurSpec& spec,
                                const GameBatch& batch, std::span<double> grad) {
  GameLoss l;
  l.clean = detector.accumulate_param_grad(batch.images, batch.labels, 1.0, grad);
  const std::vector<Tensor> adv = generate_adversarial(gens, spec, batch);
  l.generated = detector.accumulate_param_grad(adv, batch.labels, 1.0, grad);
  return l;
}

GameLoss detector_step_on_game(Detector& detector, Optimizer& opt, const GameGenerators& gens, const BlurSpec& spec,
                               const GameBatch& batch, double lr) {
  std::vector<double> grad(detector.num_params(), 0.0);
  const GameLoss l = detector_game_gradient(detector, gens, spec, batch, grad);
  require(std::isfinite(l.total()) && all_finite(grad), ErrorKind::numeric,
          "non-finite detector game loss (clean " + std::to_string(l.clean) + ", generated " +
              std::to_string(l.generated) + ")");
  opt.step(detector.params(), grad, lr);
  return l;
}

}  // namespace advblur
