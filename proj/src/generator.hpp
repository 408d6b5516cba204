#pragma once

#include <memory>
#include <span>
#include <vector>

#include "blur.hpp"
#include "detector.hpp"
#include "json.hpp"
#include "nn.hpp"
#include "optim.hpp"

namespace advblur {

struct GeneratorArch {
  int channels = 3;
  int height = 64;
  int width = 64;
  int base_width = 4;      // channels after the stem; doubled at the first downsampling
  int downsamples = 2;
  int res_blocks = 3;
  double leaky_slope = 0.2;
  double initial_sigma = 1.0;
  double head_gain = 0.1;  // scale of the initial output-head weights
  RhoBounds bounds;

  int downsampling_factor() const { return 1 << downsamples; }
  nlohmann::json to_json() const;
  static GeneratorArch from_json(const nlohmann::json& j);
};

/// Encoder-decoder CNN mapping an image to a bounded rho map (rho = 1/sigma).
class Generator {
 public:
  explicit Generator(GeneratorArch arch);

  void init(unsigned long long seed);

  const GeneratorArch& arch() const { return arch_; }
  std::vector<double>& params() { return net_.params(); }
  const std::vector<double>& params() const { return net_.params(); }
  std::size_t num_params() const { return net_.num_params(); }

  RhoMap generate_rho(const Tensor& image, nn::Trace& trace) const;
  RhoMap generate_rho(const Tensor& image) const;
  /// Accumulates dL/dtheta_G into `grad` given dL/drho for the traced forward pass.
  void backward(nn::Trace& trace, const Tensor& d_rho, std::span<double> grad) const;

 private:
  void check_image(const Tensor& image) const;

  GeneratorArch arch_;
  nn::Network net_;
};

SigmaMap generate_sigma(const Generator& generator, const Tensor& image);

/// One shared generator, or a real/fake pair where each member only sees its own class.
class GameGenerators {
 public:
  static GameGenerators single(Generator g);
  static GameGenerators pair(Generator real, Generator fake);

  bool is_pair() const { return gens_.size() == 2; }
  std::size_t size() const { return gens_.size(); }
  Generator& at(std::size_t i) { return gens_.at(i); }
  const Generator& at(std::size_t i) const { return gens_.at(i); }
  /// Index of the generator responsible for `label`.
  std::size_t index_for(int label) const;
  const Generator& for_label(int label) const { return gens_[index_for(label)]; }

 private:
  std::vector<Generator> gens_;
};

struct GameBatch {
  std::span<const Tensor> images;
  std::span<const int> labels;
};

/// Blurred images G(x) for every batch element, routed by label.
std::vector<Tensor> generate_adversarial(const GameGenerators& gens, const BlurSpec& spec, const GameBatch& batch);

struct GenGradients {
  double loss = 0.0;                       // mean detector loss on generated examples
  std::vector<std::vector<double>> grads;  // d(loss)/dtheta per generator
};

/// Gradient of the mean detector loss on generated examples w.r.t. every generator.
GenGradients generator_gradients(const Detector& detector, const GameGenerators& gens, const BlurSpec& spec,
                                 const GameBatch& batch);

/// Ascent step on theta_G with the detector frozen; returns the loss before the step.
double gen_adv_step(const Detector& detector, GameGenerators& gens, std::span<const std::unique_ptr<Optimizer>> opts,
                    const BlurSpec& spec, const GameBatch& batch, double lr);

struct GameLoss {
  double clean = 0.0;
  double generated = 0.0;
  double total() const { return clean + generated; }
};

/// Adds d(clean + generated loss)/dtheta_D into `grad` with generators frozen.
GameLoss detector_game_gradient(const Detector& detector, const GameGenerators& gens, const BlurSpec& spec,
                                const GameBatch& batch, std::span<double> grad);

/// Descent step on theta_D with generators frozen; returns the losses before the step.
GameLoss detector_step_on_game(Detector& detector, Optimizer& opt, const GameGenerators& gens, const BlurSpec& spec,
                               const GameBatch& batch, double lr);

}  // namespace advblur
