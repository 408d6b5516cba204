#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "advblur/advblur.h"

namespace {

void to_stdout(const char* line, void*) {
  std::fprintf(stdout, "%s\n", line);
  std::fflush(stdout);
}

void to_stderr(const char* line, void*) {
  std::fprintf(stderr, "%s\n", line);
  std::fflush(stderr);
}

int report(advblur_status s) {
  if (s != ADVBLUR_OK && s != ADVBLUR_ERR_ACCEPTANCE) std::fprintf(stderr, "advblur: %s\n", advblur_last_error());
  return int(s);
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string regime;
};

void add_common(CLI::App* cmd, Common& c, bool regime) {
  cmd->add_option("--config", c.config, "Experiment config file (JSON); built-in defaults when omitted");
  cmd->add_option("--seed", c.seed, "Seed; overrides ADVBLUR_SEED and the config");
  cmd->add_option("--out", c.out, "Output root directory");
  if (regime) cmd->add_option("--regime", c.regime, "Training regime");
}

/// Loads the config and applies flag and environment overrides.
advblur_status make_config(const Common& c, advblur_config** cfg) {
  advblur_status s = c.config.empty() ? advblur_config_default(cfg) : advblur_config_load(c.config.c_str(), cfg);
  if (s != ADVBLUR_OK) return s;
  advblur_overrides o{};
  o.has_seed = c.seed.has_value();
  o.seed = c.seed.value_or(0);
  o.out = c.out.empty() ? nullptr : c.out.c_str();
  o.regime = c.regime.empty() ? nullptr : c.regime.c_str();
  s = advblur_config_apply(*cfg, &o);
  if (s == ADVBLUR_OK) {
    std::uint64_t seed = 0;
    advblur_config_seed(*cfg, &seed);
    std::fprintf(stderr, "seed %llu\n", static_cast<unsigned long long>(seed));
  }
  return s;
}

std::vector<const char*> c_strings(const std::vector<std::string>& v) {
  std::vector<const char*> out;
  for (const auto& s : v) out.push_back(s.c_str());
  return out;
}

void print_dir(char* dir) {
  if (dir) std::fprintf(stdout, "%s\n", dir);
  advblur_string_free(dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blur-based adversarial training experiments on a synthetic forgery benchmark"};
  app.require_subcommand(1);
  app.set_version_flag("--version", advblur_version());

  Common common;
  std::vector<std::string> checkpoints;
  std::vector<std::string> only;

  auto* synth = app.add_subcommand("synth", "Generate the synthetic dataset");
  add_common(synth, common, false);
  auto* train = app.add_subcommand("train", "Train a detector under one regime");
  add_common(train, common, true);
  auto* attack = app.add_subcommand("attack", "White-box attack of trained detectors");
  add_common(attack, common, false);
  attack->add_option("checkpoints", checkpoints, "Detector checkpoints or training run directories");
  auto* eval = app.add_subcommand("eval", "Generalization grid and transfer matrix");
  add_common(eval, common, false);
  eval->add_option("checkpoints", checkpoints, "Detector checkpoints or training run directories");
  auto* grad = app.add_subcommand("grad-check", "Finite-difference checks of the blur and detector gradients");
  add_common(grad, common, false);
  auto* repro = app.add_subcommand("reproduce", "Run the acceptance criteria");
  add_common(repro, common, false);
  repro->add_option("--only", only, "Criteria to run (names or numbers)")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return ADVBLUR_ERR_VALIDATION;
  }

  advblur_config* cfg = nullptr;
  advblur_status s = make_config(common, &cfg);
  if (s == ADVBLUR_OK) {
    char* dir = nullptr;
    const std::vector<const char*> ck = c_strings(checkpoints);
    if (synth->parsed()) {
      s = advblur_synth(cfg, to_stdout, nullptr);
    } else if (train->parsed()) {
      s = advblur_train(cfg, to_stderr, nullptr, &dir);
    } else if (attack->parsed()) {
      s = advblur_attack(cfg, ck.data(), ck.size(), to_stderr, nullptr, &dir);
    } else if (eval->parsed()) {
      s = advblur_eval(cfg, ck.data(), ck.size(), to_stderr, nullptr, &dir);
    } else if (grad->parsed()) {
      s = advblur_grad_check(cfg, to_stderr, nullptr, &dir);
    } else if (repro->parsed()) {
      const std::vector<const char*> o = c_strings(only);
      s = advblur_reproduce(cfg, o.data(), o.size(), to_stderr, to_stdout, nullptr);
    }
    print_dir(dir);
  }
  advblur_config_free(cfg);
  return report(s);
}
