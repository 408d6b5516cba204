#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "config.hpp"
#include "eval.hpp"

namespace advblur {

/// Command-line overrides applied on top of a config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> regime;
};

/// Applies overrides and the seed environment variable, then validates.
ExperimentConfig apply_overrides(ExperimentConfig cfg, const Overrides& o, const char* env_seed);

/// Manifest path of the configured dataset; fails with a hint to run synth when absent.
std::filesystem::path require_dataset(const ExperimentConfig& cfg);

/// Loads one (split, family, quality) cell: fakes of `family` plus their paired reals.
LabeledSet load_cell(const std::filesystem::path& manifest, const std::string& split, const std::string& family,
                     const std::string& quality, std::size_t max_samples = 0);

/// Accepts a checkpoint file or a training run directory.
std::filesystem::path resolve_detector_checkpoint(const std::filesystem::path& p);

/// White-box accuracy of `model` on examples crafted against itself.
double adversarial_accuracy(const Classifier& model, const AttackSpec& attack, const LabeledSet& data,
                            double threshold, std::vector<Image>* adv_out = nullptr);

/// Generates the dataset; a second call with the same spec is a no-op.
std::filesystem::path cmd_synth(const ExperimentConfig& cfg, std::ostream& log);
/// Trains one regime into <out>/train-<regime>-s<seed>-<hash>; resumes an interrupted run.
std::filesystem::path cmd_train(const ExperimentConfig& cfg, std::ostream& log);
/// White-box attack of each checkpoint, with the kernel and epsilon sweeps, as one report.
std::filesystem::path cmd_attack(const ExperimentConfig& cfg, const std::vector<std::string>& checkpoints,
                                 std::ostream& log);
/// Generalization grid for each checkpoint plus a transfer matrix when two or more are given.
std::filesystem::path cmd_eval(const ExperimentConfig& cfg, const std::vector<std::string>& checkpoints,
                               std::ostream& log);
/// Blur and detector-path gradient checks; throws a numeric error when any case fails.
std::filesystem::path cmd_grad_check(const ExperimentConfig& cfg, std::ostream& log);

/// Directory name `<prefix>-s<seed>-<hash>` under cfg.out.
std::filesystem::path run_dir(const ExperimentConfig& cfg, const std::string& prefix, const nlohmann::json& identity);

}  // namespace advblur
