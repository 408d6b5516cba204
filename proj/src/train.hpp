#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "attacks.hpp"
#include "augment.hpp"
#include "checkpoint.hpp"
#include "data.hpp"
#include "detector.hpp"
#include "generator.hpp"
#include "json.hpp"
#include "optim.hpp"

namespace advblur {

enum class Regime {
  normal,
  aat,
  sat,
  bat_grad,
  bat_gen,
  bat_twogen,
  combined,
  aug_noise,
  aug_blur,
  aug_jpeg,
  aug_combined,
};

const char* to_string(Regime r);
Regime regime_from_string(const std::string& s);
bool regime_uses_generators(Regime r);
bool regime_uses_pair(Regime r);
bool regime_mixes_lambda(Regime r);

nlohmann::json optim_to_json(const OptimSettings& s);
OptimSettings optim_from_json(const nlohmann::json& j, OptimSettings defaults);
nlohmann::json augment_to_json(const AugmentParams& p);
AugmentParams augment_from_json(const nlohmann::json& j);

struct TrainConfig {
  Regime regime = Regime::normal;
  double lambda = 1.0;  // weight of the adversarial term for mixing regimes
  int epochs = 10;
  int batch_size = 16;
  std::uint64_t seed = 0;
  DetectorArch detector;
  OptimSettings optimizer;
  OptimSettings generator_optimizer{.lr = 2e-3, .weight_decay = 0.0};
  GeneratorArch generator;
  int generator_steps = 1;  // generator updates per detector update
  PerturbationBudget additive = PerturbationBudget::additive(0.5 / 255.0);
  PerturbationBudget spatial = PerturbationBudget::spatial(2.0);
  PerturbationBudget blur = PerturbationBudget::blur(0.1);
  double sigma_init = 1.0;
  BlurSpec blur_spec;
  AugmentParams augment;

  nlohmann::ordered_json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  void validate() const;
};

/// Everything that evolves during training.
struct TrainState {
  Detector detector;
  std::unique_ptr<Optimizer> detector_opt;
  std::optional<GameGenerators> gens;
  std::vector<std::unique_ptr<Optimizer>> gen_opts;
  int epoch = 0;       // completed epochs
  long long step = 0;  // detector updates

  explicit TrainState(const TrainConfig& cfg);
};

/// Stream-specific seed derived from the run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct StepLoss {
  double clean = 0.0;
  double adversarial = 0.0;  // adversarial / generated / augmented term
  double generator = 0.0;    // generator objective before its update
};

/// Detector gradient of one batch under the configured regime (generators and detector untouched).
StepLoss detector_step_gradient(const TrainState& state, const TrainConfig& cfg, std::span<const Tensor> images,
                                std::span<const int> labels, std::mt19937_64& rng, std::span<double> grad);

/// One full update: generator steps (game regimes) then one detector step.
StepLoss train_step(TrainState& state, const TrainConfig& cfg, std::span<const Tensor> images,
                    std::span<const int> labels, std::mt19937_64& rng);

struct EpochRecord {
  int epoch = 0;
  std::string regime;
  std::uint64_t seed = 0;
  double lr = 0.0;
  double loss_clean = 0.0;
  double loss_adv = 0.0;
  double loss_gen = 0.0;
  double train_acc = 0.0;
  std::optional<double> val_acc;
  long long steps = 0;
  double wall_time_s = 0.0;

  nlohmann::ordered_json to_json() const;
};

void run_epoch(TrainState& state, const TrainConfig& cfg, const LabeledSet& train, const LabeledSet* val,
               EpochRecord& record);

struct TrainOptions {
  std::optional<std::filesystem::path> out_dir;  // checkpoints and log; resumes when checkpoints exist
  int stop_after_epochs = -1;                    // simulate an interruption after this many epochs
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  bool resumed = false;
};

/// Trains `state` for cfg.epochs, writing per-epoch checkpoints when an output directory is set.
TrainResult train(TrainState& state, const TrainConfig& cfg, const LabeledSet& train, const LabeledSet* val,
                  const TrainOptions& options = {});

// ---- Checkpoint conversion ---------------------------------------------------

Checkpoint detector_checkpoint(const TrainState& state, const TrainConfig& cfg);
Detector detector_from_checkpoint(const Checkpoint& ck, const std::string& id = "detector");
Generator generator_from_checkpoint(const Checkpoint& ck);

/// Checkpoint file names written for a regime.
std::vector<std::string> checkpoint_files(Regime r);

void save_train_state(const std::filesystem::path& dir, const TrainState& state, const TrainConfig& cfg);
/// Restores state saved by save_train_state; false when no checkpoint exists.
bool load_train_state(const std::filesystem::path& dir, TrainState& state, const TrainConfig& cfg);

}  // namespace advblur
