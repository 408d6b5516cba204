#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>

#include "errors.hpp"
#include "jsonutil.hpp"

namespace advblur {

namespace {

nlohmann::json blur_spec_json(const BlurSpec& b) {
  return {{"kernel", b.k}, {"boundary", to_string(b.boundary)}, {"normalize", b.normalize}};
}

BlurSpec blur_spec_from(const nlohmann::json& j, BlurSpec b, const std::string& ctx) {
  StrictObject o(j, ctx);
  o.get("kernel", b.k);
  std::string boundary = to_string(b.boundary);
  o.get("boundary", boundary);
  b.boundary = boundary_from_string(boundary);
  o.get("normalize", b.normalize);
  o.finish();
  b.validate();
  return b;
}

Selection selection_from(const nlohmann::json& j, Selection s, const std::string& ctx) {
  StrictObject o(j, ctx);
  o.get("family", s.family);
  o.get("quality", s.quality);
  o.finish();
  return s;
}

nlohmann::json selection_json(const Selection& s) { return {{"family", s.family}, {"quality", s.quality}}; }

}  // namespace

ExperimentConfig::ExperimentConfig() {
  // Desk-scale schedule: 30 epochs at a constant rate (see README).
  train.epochs = 30;
  train.optimizer.decay_every = 0;
  train.generator_optimizer.decay_every = 0;
  set_seed(seed);
}

void ExperimentConfig::set_seed(std::uint64_t s) {
  seed = s;
  train.seed = s;
}

nlohmann::ordered_json ExperimentConfig::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["out"] = out;
  j["data"] = {{"root", data.root}, {"synth", data.synth.to_json()}};
  j["train_on"] = selection_json(train_on);
  nlohmann::ordered_json t = train.to_json();
  t.erase("seed");  // the top-level seed is authoritative
  j["train"] = t;
  nlohmann::ordered_json a;
  a["family"] = to_string(attack.family);
  a["budget"] = attack.budget.to_json();
  a["blur"] = blur_spec_json(attack.blur);
  a["sigma_init"] = attack.sigma_init;
  a["kernel_sweep"] = attack.kernel_sweep;
  a["epsilon_sweep"] = attack.epsilon_sweep;
  a["split"] = attack.split;
  a["selection"] = selection_json(attack.selection);
  a["max_samples"] = attack.max_samples;
  j["attack"] = a;
  j["eval"] = {{"families", eval.families}, {"qualities", eval.qualities}, {"split", eval.split},
               {"threshold", eval.threshold}, {"checkpoints", eval.checkpoints}};
  const AcceptanceConfig& c = acceptance;
  j["acceptance"] = {{"seeds", c.seeds},
                     {"epochs", c.epochs},
                     {"min_generalization_gain", c.min_generalization_gain},
                     {"combined_slack", c.combined_slack},
                     {"augment_regimes", c.augment_regimes},
                     {"attack_samples", c.attack_samples},
                     {"blur_cases", c.blur_cases},
                     {"gradient_cases", c.gradient_cases},
                     {"fgsm_epsilon", c.fgsm_epsilon}};
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  StrictObject o(j, "config");
  o.get("seed", c.seed);
  o.get("out", c.out);
  if (auto* d = o.child("data")) {
    StrictObject od(*d, "data");
    od.get("root", c.data.root);
    if (auto* s = od.child("synth")) c.data.synth = SynthSpec::from_json(*s);
    od.finish();
  }
  if (auto* s = o.child("train_on")) c.train_on = selection_from(*s, c.train_on, "train_on");
  if (auto* t = o.child("train")) {
    require(!t->contains("seed"), ErrorKind::config, "train.seed is not allowed; set the top-level seed");
    nlohmann::json tj = *t;
    // Desk-scale defaults apply unless the file overrides them.
    nlohmann::json base = c.train.to_json();
    base.erase("seed");
    base.merge_patch(tj);
    for (const char* key : {"optimizer", "generator_optimizer", "detector", "generator", "blur", "augment"})
      if (tj.contains(key) && tj[key].is_object()) {
        nlohmann::json merged = c.train.to_json()[key];
        merged.merge_patch(tj[key]);
        base[key] = merged;
      }
    // Unknown keys must still be reported, so validate the user's object shape first.
    TrainConfig::from_json(tj);
    c.train = TrainConfig::from_json(base);
  }
  if (auto* a = o.child("attack")) {
    StrictObject oa(*a, "attack");
    std::string fam = to_string(c.attack.family);
    oa.get("family", fam);
    c.attack.family = attack_family_from_string(fam);
    if (auto* b = oa.child("budget")) c.attack.budget = PerturbationBudget::from_json(*b);
    if (auto* b = oa.child("blur")) c.attack.blur = blur_spec_from(*b, c.attack.blur, "attack.blur");
    oa.get("sigma_init", c.attack.sigma_init);
    oa.get("kernel_sweep", c.attack.kernel_sweep);
    oa.get("epsilon_sweep", c.attack.epsilon_sweep);
    oa.get("split", c.attack.split);
    if (auto* s = oa.child("selection")) c.attack.selection = selection_from(*s, c.attack.selection, "attack.selection");
    oa.get("max_samples", c.attack.max_samples);
    oa.finish();
  }
  if (auto* e = o.child("eval")) {
    StrictObject oe(*e, "eval");
    oe.get("families", c.eval.families);
    oe.get("qualities", c.eval.qualities);
    oe.get("split", c.eval.split);
    oe.get("threshold", c.eval.threshold);
    oe.get("checkpoints", c.eval.checkpoints);
    oe.finish();
  }
  if (auto* a = o.child("acceptance")) {
    StrictObject oa(*a, "acceptance");
    oa.get("seeds", c.acceptance.seeds);
    oa.get("epochs", c.acceptance.epochs);
    oa.get("min_generalization_gain", c.acceptance.min_generalization_gain);
    oa.get("combined_slack", c.acceptance.combined_slack);
    oa.get("augment_regimes", c.acceptance.augment_regimes);
    oa.get("attack_samples", c.acceptance.attack_samples);
    oa.get("blur_cases", c.acceptance.blur_cases);
    oa.get("gradient_cases", c.acceptance.gradient_cases);
    oa.get("fgsm_epsilon", c.acceptance.fgsm_epsilon);
    oa.finish();
  }
  o.finish();
  c.set_seed(c.seed);
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  require(bool(in), ErrorKind::config, "cannot read config file '" + file.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, "config file '" + file.string() + "' is not valid JSON: " + e.what());
  }
  try {
    return from_json(j);
  } catch (const Error& e) {
    fail(e.kind(), "config file '" + file.string() + "': " + e.what());
  }
}

void ExperimentConfig::validate() const {
  require(!out.empty(), ErrorKind::config, "out must not be empty");
  require(!data.root.empty(), ErrorKind::config, "data.root must not be empty");
  data.synth.validate();
  train.validate();
  auto known_quality = [](const std::string& q) {
    return std::find(kQualities.begin(), kQualities.end(), q) != kQualities.end();
  };
  auto known_split = [](const std::string& s) { return std::find(kSplits.begin(), kSplits.end(), s) != kSplits.end(); };
  auto known_family = [&](const std::string& f) {
    return std::find(data.synth.families.begin(), data.synth.families.end(), f) != data.synth.families.end();
  };
  require(known_family(train_on.family) && known_quality(train_on.quality), ErrorKind::config,
          "train_on must name a synthesized family and a known quality");
  attack.budget.validate();
  require(attack.budget.family == attack.family, ErrorKind::config, "attack.budget.family must match attack.family");
  attack.blur.validate();
  require(attack.sigma_init > 0.0, ErrorKind::config, "attack.sigma_init must be positive");
  for (int k : attack.kernel_sweep) require(k >= 1 && k % 2 == 1, ErrorKind::config, "kernel_sweep entries must be odd");
  for (double e : attack.epsilon_sweep) require(e >= 0.0, ErrorKind::config, "epsilon_sweep entries must be >= 0");
  require(known_split(attack.split) && known_family(attack.selection.family) && known_quality(attack.selection.quality),
          ErrorKind::config, "attack selection must name a synthesized cell");
  require(known_split(eval.split), ErrorKind::config, "eval.split must be train, val or test");
  for (const auto& f : eval.families) require(known_family(f), ErrorKind::config, "eval family '" + f + "' is not synthesized");
  for (const auto& q : eval.qualities) require(known_quality(q), ErrorKind::config, "unknown eval quality '" + q + "'");
  require(eval.threshold >= 0.0 && eval.threshold <= 1.0, ErrorKind::config, "eval.threshold must lie in [0,1]");
  require(!acceptance.seeds.empty() && acceptance.epochs >= 1, ErrorKind::config, "acceptance needs seeds and epochs");
  require(acceptance.blur_cases >= 1 && acceptance.gradient_cases >= 1 && acceptance.fgsm_epsilon > 0.0,
          ErrorKind::config, "acceptance case counts and fgsm_epsilon must be positive");
  for (const auto& r : acceptance.augment_regimes) {
    const Regime reg = regime_from_string(r);
    require(reg == Regime::aug_noise || reg == Regime::aug_blur || reg == Regime::aug_jpeg || reg == Regime::aug_combined,
            ErrorKind::config, "acceptance.augment_regimes may only list aug_* regimes");
  }
}

std::uint64_t resolve_seed(std::uint64_t config_seed, std::optional<std::uint64_t> flag, const char* env_value) {
  if (flag) return *flag;
  if (env_value && *env_value) {
    try {
      std::size_t pos = 0;
      const std::string s(env_value);
      const unsigned long long v = std::stoull(s, &pos);
      require(pos == s.size() && std::isdigit(static_cast<unsigned char>(s[0])), ErrorKind::config, "");
      return v;
    } catch (const std::exception&) {
      fail(ErrorKind::config, std::string(kSeedEnv) + " must be a non-negative integer, got '" + env_value + "'");
    }
  }
  return config_seed;
}

std::string content_hash(const nlohmann::json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace advblur
