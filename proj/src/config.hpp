#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "attacks.hpp"
#include "data.hpp"
#include "json.hpp"
#include "train.hpp"

namespace advblur {

struct DataConfig {
  std::string root = "data/synth";  // relative paths resolve against the working directory
  SynthSpec synth;
};

/// Which training records a run uses.
struct Selection {
  std::string family = "checker";
  std::string quality = "q_mid";
};

struct AttackConfig {
  AttackFamily family = AttackFamily::blur;
  PerturbationBudget budget = PerturbationBudget::blur(0.1);
  BlurSpec blur;
  double sigma_init = 1.0;
  std::vector<int> kernel_sweep{3, 5, 9};
  std::vector<double> epsilon_sweep;  // optional extra budgets
  std::string split = "test";
  Selection selection;
  std::size_t max_samples = 0;  // 0 = all
};

struct EvalConfig {
  std::vector<std::string> families{"checker", "seam", "residual"};
  std::vector<std::string> qualities{"q_raw", "q_mid", "q_low"};
  std::string split = "test";
  double threshold = 0.5;
  std::vector<std::string> checkpoints;
};

struct AcceptanceConfig {
  std::vector<std::uint64_t> seeds{1, 2, 3};
  int epochs = 30;
  double min_generalization_gain = 0.03;
  double combined_slack = 0.01;
  std::vector<std::string> augment_regimes{"aug_noise", "aug_blur", "aug_jpeg", "aug_combined"};
  std::size_t attack_samples = 256;  // test images per attack measurement
  int blur_cases = 50;
  int gradient_cases = 20;
  double fgsm_epsilon = 16.0 / 255.0;  // additive budget compared against the blur attack
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string out = "runs";
  DataConfig data;
  Selection train_on;
  TrainConfig train;
  AttackConfig attack;
  EvalConfig eval;
  AcceptanceConfig acceptance;

  ExperimentConfig();
  nlohmann::ordered_json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  /// Reads and fully validates a config file; errors name the path.
  static ExperimentConfig load(const std::filesystem::path& file);
  void validate() const;
  /// Applies the effective seed to every seeded component.
  void set_seed(std::uint64_t s);
};

/// Flag wins over the environment variable, which wins over the config value.
std::uint64_t resolve_seed(std::uint64_t config_seed, std::optional<std::uint64_t> flag, const char* env_value);

inline constexpr const char* kSeedEnv = "ADVBLUR_SEED";

/// 16 hex digits of FNV-1a over the canonical JSON text.
std::string content_hash(const nlohmann::json& j);

}  // namespace advblur
