#include "experiment.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

#include "checkpoint.hpp"
#include "errors.hpp"
#include "gradcheck.hpp"
#include "train.hpp"

namespace advblur {

namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  require(bool(in), ErrorKind::io, "cannot read '" + file.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string text_hash(const std::string& text) { return content_hash(nlohmann::json(text)); }

std::string dataset_hash(const fs::path& manifest) {
  return text_hash(read_text(manifest.parent_path() / "synth_spec.json"));
}

/// Timestamps live here, away from the reproducible artifacts.
class RunInfo {
 public:
  RunInfo(fs::path dir, std::string command, const ExperimentConfig& cfg, std::string config_hash)
      : dir_(std::move(dir)), start_(std::chrono::steady_clock::now()) {
    info_["command"] = std::move(command);
    info_["seed"] = cfg.seed;
    info_["config_hash"] = std::move(config_hash);
    info_["started_utc"] = utc_now();
  }
  void finish() {
    info_["finished_utc"] = utc_now();
    info_["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_text_atomic(dir_ / "run_info.json", info_.dump(2) + "\n");
  }

 private:
  fs::path dir_;
  std::chrono::steady_clock::time_point start_;
  nlohmann::ordered_json info_;
};

nlohmann::ordered_json base_metadata(const ExperimentConfig& cfg, const std::string& command,
                                     const std::string& config_hash, const fs::path& manifest) {
  nlohmann::ordered_json m;
  m["command"] = command;
  m["seed"] = cfg.seed;
  m["seeds"] = std::vector<std::uint64_t>{cfg.seed};
  m["config_hash"] = config_hash;
  m["dataset_hash"] = dataset_hash(manifest);
  return m;
}

struct LoadedModel {
  fs::path file;
  std::string hash;
  std::string condition;
  Detector detector;
};

LoadedModel load_model(const std::string& spec) {
  const fs::path file = resolve_detector_checkpoint(spec);
  const std::string text = read_text(file);
  Checkpoint ck;
  try {
    ck = Checkpoint::from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::validation, "checkpoint '" + file.string() + "' is not valid JSON: " + e.what());
  }
  std::string condition = ck.extra.value("regime", std::string("detector")) + "-s" + std::to_string(ck.seed);
  Detector d = detector_from_checkpoint(ck, condition);
  return {file, text_hash(text), condition, std::move(d)};
}

std::vector<LoadedModel> load_models(const ExperimentConfig& cfg, const std::vector<std::string>& given) {
  const std::vector<std::string>& specs = given.empty() ? cfg.eval.checkpoints : given;
  require(!specs.empty(), ErrorKind::config, "no checkpoints given (pass them as arguments or set eval.checkpoints)");
  std::vector<LoadedModel> out;
  std::map<std::string, int> seen;
  for (const auto& s : specs) {
    out.push_back(load_model(s));
    const int n = seen[out.back().condition]++;
    if (n > 0) out.back().condition += "#" + std::to_string(n);
    out.back().detector.set_id(out.back().condition);
  }
  return out;
}

AttackSpec attack_spec(const AttackConfig& a) {
  AttackSpec s;
  s.family = a.family;
  s.budget = a.budget;
  s.blur = a.blur;
  s.sigma_init = a.sigma_init;
  return s;
}

void write_adversarial_set(const fs::path& dir, const Manifest& source, const std::vector<Image>& adv) {
  std::vector<SampleRecord> records;
  for (std::size_t i = 0; i < adv.size(); ++i) {
    SampleRecord r = source.records[i];
    fs::create_directories((dir / r.path).parent_path());
    write_pnm(dir / r.path, adv[i]);
    records.push_back(std::move(r));
  }
  write_manifest(dir / "manifest.jsonl", records);
}

void write_report(const fs::path& dir, const EvalReport& report) {
  write_text_atomic(dir / "report.json", report.to_json().dump(2) + "\n");
  write_text_atomic(dir / "report.txt", report.to_table());
}

}  // namespace

ExperimentConfig apply_overrides(ExperimentConfig cfg, const Overrides& o, const char* env_seed) {
  cfg.set_seed(resolve_seed(cfg.seed, o.seed, env_seed));
  if (o.out) cfg.out = *o.out;
  if (o.regime) cfg.train.regime = regime_from_string(*o.regime);
  cfg.validate();
  return cfg;
}

fs::path require_dataset(const ExperimentConfig& cfg) {
  const fs::path manifest = fs::path(cfg.data.root) / "manifest.jsonl";
  require(fs::exists(manifest) && fs::exists(fs::path(cfg.data.root) / "synth_spec.json"), ErrorKind::io,
          "no dataset at '" + cfg.data.root + "'; run the synth command with this config first");
  return manifest;
}

LabeledSet load_cell(const fs::path& manifest, const std::string& split, const std::string& family,
                     const std::string& quality, std::size_t max_samples) {
  ManifestFilter f;
  f.split = split;
  f.family = family;
  f.quality = quality;
  Manifest m = load_manifest(manifest, f);
  if (max_samples > 0 && m.records.size() > max_samples) m.records.resize(max_samples);
  return load_images(m);
}

fs::path resolve_detector_checkpoint(const fs::path& p) {
  if (fs::is_directory(p)) {
    const fs::path f = p / "detector.ckpt.json";
    require(fs::exists(f), ErrorKind::io, "run directory '" + p.string() + "' has no detector.ckpt.json");
    return f;
  }
  require(fs::exists(p), ErrorKind::io, "checkpoint '" + p.string() + "' does not exist");
  return p;
}

double adversarial_accuracy(const Classifier& model, const AttackSpec& attack, const LabeledSet& data,
                            double threshold, std::vector<Image>* adv_out) {
  require(data.size() > 0, ErrorKind::validation, "adversarial accuracy needs data");
  std::vector<double> scores;
  scores.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    Image adv = craft(model, data.images[i], data.labels[i], attack);
    scores.push_back(fake_probability(model.logits(adv)));
    if (adv_out) adv_out->push_back(std::move(adv));
  }
  return accuracy(scores, data.labels, threshold);
}

fs::path run_dir(const ExperimentConfig& cfg, const std::string& prefix, const nlohmann::json& identity) {
  return fs::path(cfg.out) / (prefix + "-s" + std::to_string(cfg.seed) + "-" + content_hash(identity).substr(0, 12));
}

fs::path cmd_synth(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  const fs::path root(cfg.data.root);
  const fs::path spec_file = root / "synth_spec.json";
  if (fs::exists(spec_file) && fs::exists(root / "manifest.jsonl")) {
    nlohmann::json existing;
    try {
      existing = nlohmann::json::parse(read_text(spec_file));
    } catch (const nlohmann::json::exception&) {
      fail(ErrorKind::io, "unreadable '" + spec_file.string() + "'");
    }
    require(existing == cfg.data.synth.to_json(), ErrorKind::config,
            "dataset at '" + root.string() + "' was generated from a different spec; choose another data.root");
    log << "dataset already present at " << root.string() << "\n";
    return root / "manifest.jsonl";
  }
  const fs::path manifest = synth_generate(cfg.data.synth, root);
  log << "wrote " << manifest.string() << "\n";
  return manifest;
}

fs::path cmd_train(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  const fs::path manifest = require_dataset(cfg);
  nlohmann::json identity = {{"train", cfg.train.to_json()},
                             {"train_on", {{"family", cfg.train_on.family}, {"quality", cfg.train_on.quality}}},
                             {"dataset", dataset_hash(manifest)}};
  const std::string hash = content_hash(identity);
  const fs::path dir = run_dir(cfg, std::string("train-") + to_string(cfg.train.regime), identity);
  fs::create_directories(dir);
  write_text_atomic(dir / "config.json", cfg.to_json().dump(2) + "\n");
  RunInfo info(dir, "train", cfg, hash);

  const LabeledSet train_set = load_cell(manifest, "train", cfg.train_on.family, cfg.train_on.quality);
  const LabeledSet val_set = load_cell(manifest, "val", cfg.train_on.family, cfg.train_on.quality);
  TrainState state(cfg.train);
  TrainOptions opt;
  opt.out_dir = dir;
  opt.on_epoch = [&](const EpochRecord& r) {
    log << "epoch " << r.epoch << " loss_clean " << r.loss_clean << " loss_adv " << r.loss_adv;
    if (r.val_acc) log << " val_acc " << *r.val_acc;
    log << "\n" << std::flush;
  };
  const TrainResult res = train(state, cfg.train, train_set, &val_set, opt);
  if (res.resumed) log << "resumed from epoch checkpoint\n";
  info.finish();
  log << "run directory " << dir.string() << "\n";
  return dir;
}

fs::path cmd_attack(const ExperimentConfig& cfg, const std::vector<std::string>& checkpoints, std::ostream& log) {
  cfg.validate();
  const fs::path manifest = require_dataset(cfg);
  std::vector<LoadedModel> models = load_models(cfg, checkpoints);
  const AttackConfig& a = cfg.attack;
  nlohmann::json identity = {{"attack", cfg.to_json()["attack"]}, {"dataset", dataset_hash(manifest)},
                             {"threshold", cfg.eval.threshold}};
  for (const auto& m : models) identity["checkpoints"].push_back(m.hash);
  const std::string hash = content_hash(identity);
  const fs::path dir = run_dir(cfg, std::string("attack-") + to_string(a.family), identity);
  fs::create_directories(dir);
  write_text_atomic(dir / "config.json", cfg.to_json().dump(2) + "\n");
  RunInfo info(dir, "attack", cfg, hash);

  ManifestFilter f;
  f.split = a.split;
  f.family = a.selection.family;
  f.quality = a.selection.quality;
  Manifest cell = load_manifest(manifest, f);
  if (a.max_samples > 0 && cell.records.size() > a.max_samples) cell.records.resize(a.max_samples);
  const LabeledSet data = load_images(cell);

  EvalReport report;
  report.metadata = base_metadata(cfg, "attack", hash, manifest);
  const double thr = cfg.eval.threshold;
  for (const LoadedModel& m : models) {
    report.metadata["checkpoints"].push_back({{"condition", m.condition}, {"hash", m.hash}});
    report.cells.push_back(
        evaluate_cell(m.detector, data, m.condition, a.selection.family, a.selection.quality, thr));
    const double clean = accuracy(m.detector.scores(data.images), data.labels, thr);
    auto entry = [&](const AttackSpec& spec, std::vector<Image>* adv) {
      nlohmann::ordered_json e;
      e["kind"] = "white_box";
      e["model"] = m.condition;
      e["attack"] = to_string(spec.family);
      e["budget"] = spec.to_json();
      e["split"] = a.split;
      e["family"] = a.selection.family;
      e["quality"] = a.selection.quality;
      e["n"] = data.size();
      e["clean_accuracy"] = clean;
      if (spec.family == AttackFamily::blur) {
        // Zero-budget reference: the initial blur alone.
        AttackSpec base = spec;
        base.budget.epsilon = 0.0;
        e["initial_blur_accuracy"] = adversarial_accuracy(m.detector, base, data, thr);
      }
      e["adv_accuracy"] = adversarial_accuracy(m.detector, spec, data, thr, adv);
      log << m.condition << " " << to_string(spec.family) << " eps " << spec.budget.epsilon;
      if (spec.family == AttackFamily::blur) log << " k " << spec.blur.k;
      log << " clean " << clean << " adv " << e["adv_accuracy"].get<double>() << "\n" << std::flush;
      return e;
    };
    const AttackSpec main = attack_spec(a);
    std::vector<Image> adv;
    report.attacks.push_back(entry(main, &adv));
    write_adversarial_set(dir / "adv" / m.condition, cell, adv);
    if (a.family == AttackFamily::blur)
      for (int k : a.kernel_sweep) {
        if (k == a.blur.k) continue;
        AttackSpec s = main;
        s.blur.k = k;
        report.attacks.push_back(entry(s, nullptr));
      }
    for (double eps : a.epsilon_sweep) {
      if (eps == a.budget.epsilon) continue;
      AttackSpec s = main;
      s.budget.epsilon = eps;
      report.attacks.push_back(entry(s, nullptr));
    }
  }
  write_report(dir, report);
  info.finish();
  log << "report " << (dir / "report.json").string() << "\n";
  return dir;
}

fs::path cmd_eval(const ExperimentConfig& cfg, const std::vector<std::string>& checkpoints, std::ostream& log) {
  cfg.validate();
  const fs::path manifest = require_dataset(cfg);
  std::vector<LoadedModel> models = load_models(cfg, checkpoints);
  nlohmann::json identity = {{"eval", cfg.to_json()["eval"]}, {"dataset", dataset_hash(manifest)}};
  if (models.size() >= 2) identity["attack"] = cfg.to_json()["attack"];
  identity["eval"].erase("checkpoints");
  for (const auto& m : models) identity["checkpoints"].push_back(m.hash);
  const std::string hash = content_hash(identity);
  const fs::path dir = run_dir(cfg, "eval", identity);
  fs::create_directories(dir);
  write_text_atomic(dir / "config.json", cfg.to_json().dump(2) + "\n");
  RunInfo info(dir, "eval", cfg, hash);

  EvalReport report;
  report.metadata = base_metadata(cfg, "eval", hash, manifest);
  for (const auto& m : models) report.metadata["checkpoints"].push_back({{"condition", m.condition}, {"hash", m.hash}});
  for (const auto& fam : cfg.eval.families)
    for (const auto& q : cfg.eval.qualities) {
      const LabeledSet cell = load_cell(manifest, cfg.eval.split, fam, q);
      for (const auto& m : models)
        report.cells.push_back(evaluate_cell(m.detector, cell, m.condition, fam, q, cfg.eval.threshold));
    }
  if (models.size() >= 2) {
    const AttackConfig& a = cfg.attack;
    const LabeledSet data = load_cell(manifest, a.split, a.selection.family, a.selection.quality, a.max_samples);
    std::vector<const Detector*> ptrs;
    for (const auto& m : models) ptrs.push_back(&m.detector);
    const AttackSpec spec = attack_spec(a);
    nlohmann::ordered_json t = transfer_to_json(transfer_matrix(ptrs, spec, data, cfg.eval.threshold), spec);
    t["kind"] = "transfer";
    report.attacks.push_back(t);
  }
  write_report(dir, report);
  info.finish();
  log << report.to_table() << "report " << (dir / "report.json").string() << "\n";
  return dir;
}

fs::path cmd_grad_check(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  nlohmann::json identity = {{"cases", cfg.acceptance.gradient_cases}};
  const std::string hash = content_hash(identity);
  const fs::path dir = run_dir(cfg, "grad-check", identity);
  fs::create_directories(dir);
  RunInfo info(dir, "grad-check", cfg, hash);
  const std::vector<GradCheckCase> cases = run_grad_checks(cfg.acceptance.gradient_cases, cfg.seed);
  nlohmann::ordered_json j;
  j["schema"] = "advblur-gradcheck";
  j["version"] = 1;
  j["metadata"] = {{"seed", cfg.seed}, {"config_hash", hash}};
  int failed = 0;
  for (const auto& c : cases) {
    j["cases"].push_back(c.to_json());
    if (!c.pass()) {
      ++failed;
      log << "FAIL " << c.name << " rel_error " << c.rel_error << " tolerance " << c.tolerance << "\n";
    }
  }
  j["pass"] = failed == 0;
  write_text_atomic(dir / "report.json", j.dump(2) + "\n");
  info.finish();
  log << cases.size() - std::size_t(failed) << "/" << cases.size() << " gradient checks passed; report "
      << (dir / "report.json").string() << "\n";
  require(failed == 0, ErrorKind::numeric, std::to_string(failed) + " gradient checks failed");
  return dir;
}

}  // namespace advblur
