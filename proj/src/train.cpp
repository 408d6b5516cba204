#include "train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "errors.hpp"
#include "jsonutil.hpp"

namespace advblur {

namespace fs = std::filesystem;

namespace {

struct RegimeName {
  Regime regime;
  const char* name;
};

constexpr RegimeName kRegimes[] = {
    {Regime::normal, "normal"},         {Regime::aat, "aat"},
    {Regime::sat, "sat"},               {Regime::bat_grad, "bat_grad"},
    {Regime::bat_gen, "bat_gen"},       {Regime::bat_twogen, "bat_twogen"},
    {Regime::combined, "combined"},     {Regime::aug_noise, "aug_noise"},
    {Regime::aug_blur, "aug_blur"},     {Regime::aug_jpeg, "aug_jpeg"},
    {Regime::aug_combined, "aug_combined"},
};

std::optional<AugmentKind> augment_kind(Regime r) {
  switch (r) {
    case Regime::aug_noise: return AugmentKind::noise;
    case Regime::aug_blur: return AugmentKind::blur;
    case Regime::aug_jpeg: return AugmentKind::jpeg;
    case Regime::aug_combined: return AugmentKind::combined;
    default: return std::nullopt;
  }
}

}  // namespace

const char* to_string(Regime r) {
  for (const auto& e : kRegimes)
    if (e.regime == r) return e.name;
  return "?";
}

Regime regime_from_string(const std::string& s) {
  for (const auto& e : kRegimes)
    if (s == e.name) return e.regime;
  fail(ErrorKind::config, "unknown regime '" + s + "'");
}

bool regime_uses_generators(Regime r) {
  return r == Regime::bat_gen || r == Regime::bat_twogen || r == Regime::combined;
}

bool regime_uses_pair(Regime r) { return r == Regime::bat_twogen || r == Regime::combined; }

bool regime_mixes_lambda(Regime r) {
  return r == Regime::aat || r == Regime::sat || r == Regime::bat_grad || r == Regime::combined;
}

nlohmann::json optim_to_json(const OptimSettings& s) {
  return {{"kind", s.kind},
          {"lr", s.lr},
          {"beta1", s.beta1},
          {"beta2", s.beta2},
          {"eps", s.eps},
          {"weight_decay", s.weight_decay},
          {"decay_every", s.decay_every},
          {"decay_factor", s.decay_factor}};
}

OptimSettings optim_from_json(const nlohmann::json& j, OptimSettings s) {
  StrictObject o(j, "optimizer");
  o.get("kind", s.kind);
  o.get("lr", s.lr);
  o.get("beta1", s.beta1);
  o.get("beta2", s.beta2);
  o.get("eps", s.eps);
  o.get("weight_decay", s.weight_decay);
  o.get("decay_every", s.decay_every);
  o.get("decay_factor", s.decay_factor);
  o.finish();
  s.validate();
  return s;
}

nlohmann::json augment_to_json(const AugmentParams& p) {
  return {{"noise_p", p.noise_p},           {"noise_mean", p.noise_mean},
          {"noise_var_max", p.noise_var_max}, {"blur_p", p.blur_p},
          {"blur_kernel", p.blur_kernel},   {"blur_var_max", p.blur_var_max},
          {"jpeg_p", p.jpeg_p},             {"jpeg_quality_min", p.jpeg_quality_min},
          {"jpeg_quality_max", p.jpeg_quality_max}};
}

AugmentParams augment_from_json(const nlohmann::json& j) {
  AugmentParams p;
  StrictObject o(j, "augment");
  o.get("noise_p", p.noise_p);
  o.get("noise_mean", p.noise_mean);
  o.get("noise_var_max", p.noise_var_max);
  o.get("blur_p", p.blur_p);
  o.get("blur_kernel", p.blur_kernel);
  o.get("blur_var_max", p.blur_var_max);
  o.get("jpeg_p", p.jpeg_p);
  o.get("jpeg_quality_min", p.jpeg_quality_min);
  o.get("jpeg_quality_max", p.jpeg_quality_max);
  o.finish();
  return p;
}

nlohmann::ordered_json TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["regime"] = to_string(regime);
  j["lambda"] = lambda;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["seed"] = seed;
  j["detector"] = detector.to_json();
  j["optimizer"] = optim_to_json(optimizer);
  j["generator_optimizer"] = optim_to_json(generator_optimizer);
  j["generator"] = generator.to_json();
  j["generator_steps"] = generator_steps;
  j["budgets"] = {{"additive", additive.to_json()}, {"spatial", spatial.to_json()}, {"blur", blur.to_json()}};
  j["sigma_init"] = sigma_init;
  j["blur"] = {{"kernel", blur_spec.k}, {"boundary", to_string(blur_spec.boundary)}, {"normalize", blur_spec.normalize}};
  j["augment"] = augment_to_json(augment);
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  StrictObject o(j, "train");
  std::string regime = to_string(c.regime);
  o.get("regime", regime);
  c.regime = regime_from_string(regime);
  o.get("lambda", c.lambda);
  o.get("epochs", c.epochs);
  o.get("batch_size", c.batch_size);
  o.get("seed", c.seed);
  if (auto* d = o.child("detector")) c.detector = DetectorArch::from_json(*d);
  if (auto* d = o.child("optimizer")) c.optimizer = optim_from_json(*d, c.optimizer);
  if (auto* d = o.child("generator_optimizer")) c.generator_optimizer = optim_from_json(*d, c.generator_optimizer);
  if (auto* d = o.child("generator")) c.generator = GeneratorArch::from_json(*d);
  o.get("generator_steps", c.generator_steps);
  if (auto* b = o.child("budgets")) {
    StrictObject bo(*b, "train.budgets");
    if (auto* x = bo.child("additive")) c.additive = PerturbationBudget::from_json(*x);
    if (auto* x = bo.child("spatial")) c.spatial = PerturbationBudget::from_json(*x);
    if (auto* x = bo.child("blur")) c.blur = PerturbationBudget::from_json(*x);
    bo.finish();
  }
  o.get("sigma_init", c.sigma_init);
  if (auto* b = o.child("blur")) {
    StrictObject bo(*b, "train.blur");
    bo.get("kernel", c.blur_spec.k);
    std::string boundary = to_string(c.blur_spec.boundary);
    bo.get("boundary", boundary);
    c.blur_spec.boundary = boundary_from_string(boundary);
    bo.get("normalize", c.blur_spec.normalize);
    bo.finish();
  }
  if (auto* a = o.child("augment")) c.augment = augment_from_json(*a);
  o.finish();
  c.validate();
  return c;
}

void TrainConfig::validate() const {
  require(std::isfinite(lambda) && lambda >= 0.0, ErrorKind::config, "lambda must be finite and >= 0");
  require(epochs >= 0, ErrorKind::config, "epochs must be >= 0");
  require(batch_size >= 1, ErrorKind::config, "batch_size must be >= 1");
  require(generator_steps >= 0, ErrorKind::config, "generator_steps must be >= 0");
  optimizer.validate();
  generator_optimizer.validate();
  additive.validate();
  spatial.validate();
  blur.validate();
  require(additive.family == AttackFamily::additive && spatial.family == AttackFamily::spatial &&
              blur.family == AttackFamily::blur,
          ErrorKind::config, "budget families must match their slots");
  blur_spec.validate();
  require(sigma_init > 0.0, ErrorKind::config, "sigma_init must be positive");
  require(generator.channels == detector.channels && generator.height == detector.height &&
              generator.width == detector.width,
          ErrorKind::config, "generator and detector image shapes differ");
  require(detector.height % generator.downsampling_factor() == 0 && detector.width % generator.downsampling_factor() == 0,
          ErrorKind::config, "image size must be divisible by the generator downsampling factor");
  require(augment.blur_kernel % 2 == 1 && augment.jpeg_quality_min >= 1 && augment.jpeg_quality_max <= 100 &&
              augment.jpeg_quality_min <= augment.jpeg_quality_max,
          ErrorKind::config, "invalid augmentation parameters");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

TrainState::TrainState(const TrainConfig& cfg) : detector(cfg.detector) {
  cfg.validate();
  detector.init(derive_seed(cfg.seed, 1));
  detector_opt = make_optimizer(cfg.optimizer, detector.num_params());
  if (regime_uses_generators(cfg.regime)) {
    Generator a(cfg.generator);
    a.init(derive_seed(cfg.seed, 2));
    if (regime_uses_pair(cfg.regime)) {
      Generator b(cfg.generator);
      b.init(derive_seed(cfg.seed, 3));
      gens = GameGenerators::pair(std::move(a), std::move(b));
    } else {
      gens = GameGenerators::single(std::move(a));
    }
    for (std::size_t g = 0; g < gens->size(); ++g)
      gen_opts.push_back(make_optimizer(cfg.generator_optimizer, gens->at(g).num_params()));
  }
}

StepLoss detector_step_gradient(const TrainState& state, const TrainConfig& cfg, std::span<const Tensor> images,
                                std::span<const int> labels, std::mt19937_64& rng, std::span<double> grad) {
  require(images.size() == labels.size() && !images.empty(), ErrorKind::validation, "empty or mismatched batch");
  const Detector& det = state.detector;
  StepLoss loss;

  if (auto kind = augment_kind(cfg.regime)) {
    std::vector<Tensor> aug;
    aug.reserve(images.size());
    for (const Tensor& x : images) aug.push_back(augment_traditional(x, *kind, rng, cfg.augment));
    loss.adversarial = det.accumulate_param_grad(aug, labels, 1.0, grad);
    return loss;
  }
  if (cfg.regime == Regime::bat_gen || cfg.regime == Regime::bat_twogen) {
    require(state.gens.has_value(), ErrorKind::config, "game regime without generators");
    const GameLoss g = detector_game_gradient(det, *state.gens, cfg.blur_spec, GameBatch{images, labels}, grad);
    loss.clean = g.clean;
    loss.adversarial = g.generated;
    return loss;
  }

  loss.clean = det.accumulate_param_grad(images, labels, 1.0, grad);
  if (cfg.regime == Regime::normal || cfg.lambda == 0.0) return loss;

  std::vector<Tensor> adv;
  adv.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Tensor& x = images[i];
    const int y = labels[i];
    switch (cfg.regime) {
      case Regime::aat: adv.push_back(pgd(det, x, y, cfg.additive).image()); break;
      case Regime::sat: adv.push_back(spatial_attack(det, x, y, cfg.spatial).example.image()); break;
      case Regime::bat_grad:
        adv.push_back(blur_attack(det, x, y, cfg.blur, SigmaMap::constant(x.h, x.w, cfg.sigma_init), cfg.blur_spec,
                                  cfg.generator.bounds)
                          .example.image());
        break;
      case Regime::combined: {
        require(state.gens.has_value(), ErrorKind::config, "combined regime without generators");
        const Generator* g = &state.gens->for_label(y);
        adv.push_back(
            combined_attack(det, x, y, cfg.blur, cfg.additive, SigmaSource{g}, cfg.blur_spec, g->arch().bounds).image());
        break;
      }
      default: fail(ErrorKind::config, std::string("regime ") + to_string(cfg.regime) + " has no adversarial term");
    }
  }
  loss.adversarial = det.accumulate_param_grad(adv, labels, cfg.lambda, grad);
  return loss;
}

StepLoss train_step(TrainState& state, const TrainConfig& cfg, std::span<const Tensor> images,
                    std::span<const int> labels, std::mt19937_64& rng) {
  StepLoss loss;
  if (state.gens) {
    const double glr = cfg.generator_optimizer.lr_at_epoch(state.epoch);
    for (int s = 0; s < cfg.generator_steps; ++s) {
      const double l =
          gen_adv_step(state.detector, *state.gens, state.gen_opts, cfg.blur_spec, GameBatch{images, labels}, glr);
      if (s == 0) loss.generator = l;
    }
  }
  std::vector<double> grad(state.detector.num_params(), 0.0);
  const StepLoss d = detector_step_gradient(state, cfg, images, labels, rng, grad);
  require(std::isfinite(d.clean) && std::isfinite(d.adversarial) && all_finite(grad), ErrorKind::numeric,
          "non-finite detector loss at step " + std::to_string(state.step) + " (clean " + std::to_string(d.clean) +
              ", adversarial " + std::to_string(d.adversarial) + ")");
  state.detector_opt->step(state.detector.params(), grad, cfg.optimizer.lr_at_epoch(state.epoch));
  ++state.step;
  loss.clean = d.clean;
  loss.adversarial = d.adversarial;
  return loss;
}

nlohmann::ordered_json EpochRecord::to_json() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["regime"] = regime;
  j["seed"] = seed;
  j["lr"] = lr;
  j["loss_clean"] = loss_clean;
  j["loss_adv"] = loss_adv;
  j["loss_gen"] = loss_gen;
  j["val_acc"] = val_acc ? nlohmann::ordered_json(*val_acc) : nlohmann::ordered_json(nullptr);
  j["steps"] = steps;
  j["wall_time_s"] = wall_time_s;
  return j;
}

void run_epoch(TrainState& state, const TrainConfig& cfg, const LabeledSet& train, const LabeledSet* val,
               EpochRecord& record) {
  require(train.size() > 0, ErrorKind::validation, "empty training set");
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(derive_seed(cfg.seed, 1000 + std::uint64_t(state.epoch)));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  record = EpochRecord{};
  record.epoch = state.epoch;
  record.regime = to_string(cfg.regime);
  record.seed = cfg.seed;
  record.lr = cfg.optimizer.lr_at_epoch(state.epoch);
  std::vector<Tensor> images;
  std::vector<int> labels;
  for (std::size_t start = 0; start < order.size(); start += std::size_t(cfg.batch_size)) {
    const std::size_t end = std::min(order.size(), start + std::size_t(cfg.batch_size));
    images.clear();
    labels.clear();
    for (std::size_t k = start; k < end; ++k) {
      images.push_back(train.images[order[k]]);
      labels.push_back(train.labels[order[k]]);
    }
    const StepLoss l = train_step(state, cfg, images, labels, rng);
    const double w = double(end - start) / double(order.size());
    record.loss_clean += w * l.clean;
    record.loss_adv += w * l.adversarial;
    record.loss_gen += w * l.generator;
  }
  ++state.epoch;
  if (val && val->size() > 0) {
    const std::vector<double> s = state.detector.scores(val->images);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < s.size(); ++i) correct += std::size_t((s[i] >= 0.5 ? 1 : 0) == val->labels[i]);
    record.val_acc = double(correct) / double(s.size());
  }
  record.steps = state.step;
  record.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

namespace {

nlohmann::json resumable_config(const TrainConfig& cfg) {
  nlohmann::json j = cfg.to_json();
  j.erase("epochs");  // a finished run may be extended
  return j;
}

void rewrite_log(const fs::path& file, int keep_epochs) {
  std::vector<std::string> kept;
  std::ifstream in(file);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (!j.is_discarded() && j.value("epoch", 1 << 30) < keep_epochs) kept.push_back(line);
  }
  std::string text;
  for (const auto& l : kept) text += l + "\n";
  write_text_atomic(file, text);
}

}  // namespace

TrainResult train(TrainState& state, const TrainConfig& cfg, const LabeledSet& train_set, const LabeledSet* val,
                  const TrainOptions& options) {
  cfg.validate();
  require(state.gens.has_value() == regime_uses_generators(cfg.regime), ErrorKind::config,
          std::string("regime ") + to_string(cfg.regime) +
              (regime_uses_generators(cfg.regime) ? " requires generators" : " does not take generators"));
  if (state.gens)
    require(state.gens->is_pair() == regime_uses_pair(cfg.regime), ErrorKind::config,
            std::string("regime ") + to_string(cfg.regime) + (regime_uses_pair(cfg.regime)
                                                                  ? " needs a real/fake generator pair"
                                                                  : " needs a single generator"));
  TrainResult result;
  fs::path log_file;
  if (options.out_dir) {
    fs::create_directories(*options.out_dir);
    log_file = *options.out_dir / "train_log.jsonl";
    result.resumed = load_train_state(*options.out_dir, state, cfg);
    rewrite_log(log_file, state.epoch);
  }
  int ran = 0;
  while (state.epoch < cfg.epochs) {
    if (options.stop_after_epochs >= 0 && ran >= options.stop_after_epochs) break;
    EpochRecord rec;
    run_epoch(state, cfg, train_set, val, rec);
    ++ran;
    if (options.out_dir) {
      save_train_state(*options.out_dir, state, cfg);
      std::ofstream(log_file, std::ios::app) << rec.to_json().dump() << '\n';
    }
    if (options.on_epoch) options.on_epoch(rec);
    result.log.push_back(std::move(rec));
  }
  return result;
}

// ---- Checkpoints ------------------------------------------------------------

Checkpoint detector_checkpoint(const TrainState& state, const TrainConfig& cfg) {
  Checkpoint ck;
  ck.kind = "detector";
  ck.arch = state.detector.arch().to_json();
  ck.seed = cfg.seed;
  ck.step = state.step;
  ck.epoch = state.epoch;
  ck.params = state.detector.params();
  ck.optimizer = state.detector_opt->state();
  ck.extra = {{"regime", to_string(cfg.regime)}, {"train", resumable_config(cfg)}};
  return ck;
}

Detector detector_from_checkpoint(const Checkpoint& ck, const std::string& id) {
  require(ck.kind == "detector", ErrorKind::validation, "checkpoint holds a " + ck.kind + ", not a detector");
  Detector d(DetectorArch::from_json(ck.arch), id);
  require(ck.params.size() == d.num_params(), ErrorKind::validation, "detector checkpoint parameter count mismatch");
  d.params() = ck.params;
  return d;
}

Generator generator_from_checkpoint(const Checkpoint& ck) {
  require(ck.kind == "generator", ErrorKind::validation, "checkpoint holds a " + ck.kind + ", not a generator");
  Generator g(GeneratorArch::from_json(ck.arch));
  require(ck.params.size() == g.num_params(), ErrorKind::validation, "generator checkpoint parameter count mismatch");
  g.params() = ck.params;
  return g;
}

std::vector<std::string> checkpoint_files(Regime r) {
  std::vector<std::string> files{"detector.ckpt.json"};
  if (regime_uses_pair(r)) {
    files.push_back("gen_real.ckpt.json");
    files.push_back("gen_fake.ckpt.json");
  } else if (regime_uses_generators(r)) {
    files.push_back("generator.ckpt.json");
  }
  return files;
}

void save_train_state(const fs::path& dir, const TrainState& state, const TrainConfig& cfg) {
  const auto files = checkpoint_files(cfg.regime);
  // Generators first: the detector file marks a complete epoch.
  if (state.gens) {
    for (std::size_t g = 0; g < state.gens->size(); ++g) {
      Checkpoint ck;
      ck.kind = "generator";
      ck.arch = state.gens->at(g).arch().to_json();
      ck.seed = cfg.seed;
      ck.step = state.step;
      ck.epoch = state.epoch;
      ck.params = state.gens->at(g).params();
      ck.optimizer = state.gen_opts[g]->state();
      ck.extra = {{"role", state.gens->is_pair() ? (g == 0 ? "real" : "fake") : "shared"}};
      save_checkpoint(dir / files[1 + g], ck);
    }
  }
  save_checkpoint(dir / files[0], detector_checkpoint(state, cfg));
}

bool load_train_state(const fs::path& dir, TrainState& state, const TrainConfig& cfg) {
  const auto files = checkpoint_files(cfg.regime);
  if (!fs::exists(dir / files[0])) return false;
  const Checkpoint det = load_checkpoint(dir / files[0]);
  require(det.extra.value("train", nlohmann::json()) == resumable_config(cfg), ErrorKind::config,
          "checkpoint in '" + dir.string() + "' was written by a different training config");
  state.detector.params() = detector_from_checkpoint(det).params();
  state.detector_opt->load_state(det.optimizer);
  state.epoch = det.epoch;
  state.step = det.step;
  if (state.gens) {
    for (std::size_t g = 0; g < state.gens->size(); ++g) {
      const Checkpoint ck = load_checkpoint(dir / files[1 + g]);
      require(ck.epoch == det.epoch, ErrorKind::validation, "generator checkpoint is from a different epoch");
      state.gens->at(g).params() = generator_from_checkpoint(ck).params();
      state.gen_opts[g]->load_state(ck.optimizer);
    }
  }
  return true;
}

}  // namespace advblur
