#include "acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>

#include "blur.hpp"
#include "checkpoint.hpp"
#include "errors.hpp"
#include "eval.hpp"
#include "experiment.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "train.hpp"

namespace advblur {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kNames{"blur-operator", "grad-checks",   "attack-contracts", "kernel-order",
                                      "generalization", "augmentation", "transfer",         "determinism"};

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

double median(std::vector<double> v) {
  require(!v.empty(), ErrorKind::validation, "median of nothing");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

oracle::Planes planes(const Image& x) { return {x.c, x.h, x.w, x.data}; }

oracle::Pad oracle_pad(Boundary b) {
  return b == Boundary::reflect ? oracle::Pad::reflect : b == Boundary::replicate ? oracle::Pad::replicate
                                                                                   : oracle::Pad::zero;
}

/// Unseen-quality, unseen-family and overall unseen mean AUC of one detector.
struct Generalization {
  double uq = 0.0;
  double uf = 0.0;
  double mean = 0.0;
};

class Suite {
 public:
  Suite(const ExperimentConfig& cfg, std::ostream& progress) : cfg_(cfg), log_(progress) {}

  CriterionResult run(int id) {
    CriterionResult r;
    r.id = id;
    r.name = kNames[std::size_t(id - 1)];
    const double budgets[] = {10, 60, 300, 600, 7200, 0, 600, 0};
    r.budget_seconds = budgets[id - 1];
    const auto t0 = std::chrono::steady_clock::now();
    try {
      switch (id) {
        case 1: blur_operator(r); break;
        case 2: grad_checks(r); break;
        case 3: attack_contracts(r); break;
        case 4: kernel_order(r); break;
        case 5: generalization(r); break;
        case 6: augmentation(r); break;
        case 7: transfer(r); break;
        case 8: determinism(r); break;
      }
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("error: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (r.pass && r.budget_seconds > 0 && r.seconds > r.budget_seconds) {
      r.pass = false;
      r.detail += "; runtime over budget";
    }
    return r;
  }

 private:
  const ExperimentConfig& cfg_;
  std::ostream& log_;
  std::map<std::string, fs::path> trained_;
  std::map<std::string, Generalization> gen_;
  std::optional<LabeledSet> attack_data_;

  // ---- shared resources ------------------------------------------------------

  fs::path trained_dir(Regime regime, std::uint64_t seed) {
    const std::string key = std::string(to_string(regime)) + "/" + std::to_string(seed);
    if (auto it = trained_.find(key); it != trained_.end()) return it->second;
    ExperimentConfig c = cfg_;
    c.set_seed(seed);
    c.train.regime = regime;
    c.train.epochs = cfg_.acceptance.epochs;
    c.out = (fs::path(cfg_.out) / "acceptance-cache").string();
    log_ << "training " << key << " (" << c.train.epochs << " epochs)\n" << std::flush;
    std::ostringstream quiet;
    const fs::path dir = cmd_train(c, quiet);
    trained_[key] = dir;
    return dir;
  }

  Detector detector(Regime regime, std::uint64_t seed) {
    const Checkpoint ck = load_checkpoint(trained_dir(regime, seed) / "detector.ckpt.json");
    return detector_from_checkpoint(ck, std::string(to_string(regime)) + "-s" + std::to_string(seed));
  }

  const LabeledSet& attack_data() {
    if (!attack_data_) {
      const AttackConfig& a = cfg_.attack;
      attack_data_ = load_cell(require_dataset(cfg_), a.split, a.selection.family, a.selection.quality,
                               cfg_.acceptance.attack_samples);
    }
    return *attack_data_;
  }

  AttackSpec blur_spec(int k) const {
    AttackSpec s;
    s.family = AttackFamily::blur;
    s.budget = cfg_.attack.family == AttackFamily::blur ? cfg_.attack.budget : PerturbationBudget::blur(0.1);
    s.blur = cfg_.attack.blur;
    if (k > 0) s.blur.k = k;
    s.sigma_init = cfg_.attack.sigma_init;
    return s;
  }

  AttackSpec fgsm_spec() const {
    AttackSpec s;
    s.family = AttackFamily::additive;
    s.budget = PerturbationBudget::additive(cfg_.acceptance.fgsm_epsilon);
    return s;
  }

  std::vector<std::string> unseen_families() const {
    std::vector<std::string> out;
    for (const auto& f : cfg_.data.synth.families)
      if (f != cfg_.train_on.family) out.push_back(f);
    return out;
  }

  std::vector<std::string> unseen_qualities() const {
    std::vector<std::string> out;
    for (const auto& q : kQualities)
      if (q != cfg_.train_on.quality) out.push_back(q);
    return out;
  }

  Generalization generalization_of(Regime regime, std::uint64_t seed) {
    const std::string key = std::string(to_string(regime)) + "/" + std::to_string(seed);
    if (auto it = gen_.find(key); it != gen_.end()) return it->second;
    const Detector d = detector(regime, seed);
    const fs::path manifest = require_dataset(cfg_);
    auto cell_auc = [&](const std::string& fam, const std::string& q) {
      const LabeledSet s = load_cell(manifest, "test", fam, q);
      const CellMetrics m = evaluate_cell(d, s, key, fam, q);
      require(!m.skipped, ErrorKind::validation, "test cell " + fam + "/" + q + " is empty");
      return m.auc;
    };
    std::vector<double> uq, uf;
    for (const auto& q : unseen_qualities()) uq.push_back(cell_auc(cfg_.train_on.family, q));
    for (const auto& f : unseen_families()) uf.push_back(cell_auc(f, cfg_.train_on.quality));
    auto mean = [](const std::vector<double>& v) {
      double s = 0.0;
      for (double x : v) s += x;
      return s / double(v.size());
    };
    std::vector<double> all = uq;
    all.insert(all.end(), uf.begin(), uf.end());
    Generalization g{mean(uq), mean(uf), mean(all)};
    log_ << "  " << key << " unseen-quality " << fmt(g.uq) << " unseen-family " << fmt(g.uf) << " mean "
         << fmt(g.mean) << "\n"
         << std::flush;
    gen_[key] = g;
    return g;
  }

  // ---- criteria ----------------------------------------------------------------

  void blur_operator(CriterionResult& r) {
    std::mt19937_64 rng(cfg_.seed);
    std::uniform_int_distribution<int> pick(0, 3), bnd(0, 2);
    std::uniform_real_distribution<double> u(0.0, 1.0), su(0.2, 4.0);
    const int kernels[] = {1, 3, 5, 9};
    const Boundary boundaries[] = {Boundary::reflect, Boundary::replicate, Boundary::zero};
    double worst_oracle = 0.0;
    for (int n = 0; n < cfg_.acceptance.blur_cases; ++n) {
      BlurSpec spec;
      spec.k = kernels[pick(rng)];
      std::uniform_int_distribution<int> dim(spec.k, 16);
      const int c = pick(rng) % 2 ? 3 : 1, h = dim(rng), w = dim(rng);
      Image x(c, h, w);
      for (double& v : x.data) v = u(rng);
      SigmaMap s = SigmaMap::constant(h, w, 1.0);
      for (double& v : s.sigma.data) v = su(rng);
      spec.boundary = boundaries[bnd(rng)];
      spec.normalize = n % 5 != 4;
      const Image y = blur_apply(x, s, spec);
      const oracle::Planes ref = oracle::naive_blur(planes(x), s.sigma.data, spec.k, oracle_pad(spec.boundary),
                                                    spec.normalize);
      for (std::size_t i = 0; i < y.size(); ++i) worst_oracle = std::max(worst_oracle, std::abs(y.data[i] - ref.v[i]));
    }
    double worst_const = 0.0, worst_identity = 0.0;
    for (int n = 0; n < 10; ++n) {
      BlurSpec spec;
      spec.k = kernels[pick(rng)];
      std::uniform_int_distribution<int> dim(spec.k, 16);
      const int h = dim(rng), w = dim(rng);
      spec.boundary = n % 2 ? Boundary::reflect : Boundary::replicate;
      const double value = u(rng);
      SigmaMap s = SigmaMap::constant(h, w, 1.0);
      for (double& v : s.sigma.data) v = su(rng) * 10.0;
      const Image y = blur_apply(Image(3, h, w, value), s, spec);
      for (double v : y.data) worst_const = std::max(worst_const, std::abs(v - value));
      Image x(3, h, w);
      for (double& v : x.data) v = u(rng);
      const Image id = blur_apply(x, SigmaMap::constant(h, w, 1e-3), spec);
      worst_identity = std::max(worst_identity, max_abs_diff(id, x));
    }
    r.pass = worst_oracle <= 1e-9 && worst_const <= 1e-6 && worst_identity <= 1e-4;
    r.detail = std::to_string(cfg_.acceptance.blur_cases) + " oracle cases max err " + sci(worst_oracle) +
               " (<= 1e-9); constant image " + sci(worst_const) + " (<= 1e-6); sigma=1e-3 identity " +
               sci(worst_identity) + " (<= 1e-4)";
    r.measurements = {{"oracle_max_abs_error", worst_oracle},
                      {"constant_max_abs_error", worst_const},
                      {"identity_max_abs_error", worst_identity}};
  }

  void grad_checks(CriterionResult& r) {
    const std::vector<GradCheckCase> cases = run_grad_checks(cfg_.acceptance.gradient_cases, cfg_.seed);
    double blur_worst = 0.0, det_worst = 0.0;
    int failed = 0;
    for (const auto& c : cases) {
      double& worst = c.name.rfind("blur/", 0) == 0 ? blur_worst : det_worst;
      worst = std::max(worst, c.rel_error);
      if (!c.pass()) ++failed;
      r.measurements["cases"].push_back(c.to_json());
    }
    r.pass = failed == 0;
    r.detail = std::to_string(cases.size() - 3) + " blur cases (sigma and rho) max rel err " +
               sci(blur_worst) + " (< 1e-4); detector path max rel err " + sci(det_worst) + " (< 1e-3)";
  }

  void attack_contracts(CriterionResult& r) {
    const LabeledSet& data = attack_data();
    const std::vector<std::uint64_t>& seeds = cfg_.acceptance.seeds;
    bool bitwise = true, identity = true, linf = true;
    std::vector<double> blur_frac, fgsm_frac;
    double worst_linf_excess = 0.0;
    for (std::uint64_t seed : seeds) {
      const Detector d = detector(Regime::normal, seed);
      int fakes = 0, blur_up = 0, fgsm_up = 0;
      for (std::size_t i = 0; i < data.size(); ++i) {
        const Image& x = data.images[i];
        const int y = data.labels[i];
        const double eps = cfg_.acceptance.fgsm_epsilon;
        const AdversarialExample f = fgsm(d, x, y, eps);
        if (seed == seeds.front() && i < 32) {
          const AdversarialExample p = pgd(d, x, y, PerturbationBudget::additive(eps, 1, eps));
          bitwise = bitwise && p.image().data == f.image().data;
          for (double e : {2.0 / 255.0, eps}) {
            const AdversarialExample m = pgd(d, x, y, PerturbationBudget::additive(e, 10, e / 4.0));
            const double excess = max_abs_diff(m.image(), x) - e;
            worst_linf_excess = std::max(worst_linf_excess, excess);
            linf = linf && excess <= 0.0;
          }
          identity = identity && pgd(d, x, y, PerturbationBudget::additive(0.0, 5)).image().data == x.data;
          identity = identity && fgsm(d, x, y, 0.0).image().data == x.data;
          identity = identity && spatial_attack(d, x, y, PerturbationBudget::spatial(0.0)).example.image().data == x.data;
          const AttackSpec b = blur_spec(0);
          const SigmaMap init = SigmaMap::constant(x.h, x.w, b.sigma_init);
          const BlurAttackResult z = blur_attack(d, x, y, PerturbationBudget::blur(0.0, 3), init, b.blur);
          identity = identity && z.sigma.sigma.data == init.sigma.data &&
                     z.example.image().data == blur_apply(x, init, b.blur).data;
        }
        if (y != kLabelFake) continue;
        ++fakes;
        const AttackSpec b = blur_spec(0);
        const BlurAttackResult ba =
            blur_attack(d, x, y, b.budget, SigmaMap::constant(x.h, x.w, b.sigma_init), b.blur);
        blur_up += ba.example.provenance().loss_after > ba.example.provenance().loss_before;
        fgsm_up += f.provenance().loss_after > f.provenance().loss_before;
      }
      require(fakes > 0, ErrorKind::validation, "attack data has no fake samples");
      blur_frac.push_back(double(blur_up) / fakes);
      fgsm_frac.push_back(double(fgsm_up) / fakes);
      log_ << "  seed " << seed << " loss increase: blur " << fmt(blur_frac.back()) << " fgsm "
           << fmt(fgsm_frac.back()) << "\n"
           << std::flush;
    }
    const double mb = median(blur_frac), mf = median(fgsm_frac);
    r.pass = bitwise && identity && linf && mb >= 0.95 && mf >= 0.95;
    r.detail = std::string("pgd1==fgsm ") + (bitwise ? "yes" : "NO") + "; eps=0 identity " +
               (identity ? "yes" : "NO") + "; l_inf exact " + (linf ? "yes" : "NO") +
               "; median fake loss increase blur " + fmt(mb) + " fgsm " + fmt(mf) + " (>= 0.95)";
    r.measurements = {{"pgd_equals_fgsm", bitwise},       {"zero_budget_identity", identity},
                      {"linf_exact", linf},               {"linf_max_excess", worst_linf_excess},
                      {"blur_loss_increase", blur_frac}, {"fgsm_loss_increase", fgsm_frac},
                      {"blur_median", mb},                {"fgsm_median", mf}};
  }

  void kernel_order(CriterionResult& r) {
    const LabeledSet& data = attack_data();
    std::vector<int> ks = cfg_.attack.kernel_sweep;
    std::sort(ks.begin(), ks.end());
    std::vector<double> med;
    nlohmann::ordered_json per;
    for (int k : ks) {
      std::vector<double> accs;
      for (std::uint64_t seed : cfg_.acceptance.seeds)
        accs.push_back(adversarial_accuracy(detector(Regime::normal, seed), blur_spec(k), data, cfg_.eval.threshold));
      med.push_back(median(accs));
      per[std::to_string(k)] = accs;
      log_ << "  k=" << k << " white-box accuracy " << fmt(med.back()) << "\n" << std::flush;
    }
    r.pass = true;
    r.detail = "median white-box blur accuracy";
    for (std::size_t i = 0; i < ks.size(); ++i) {
      r.detail += (i ? " >= " : " ") + std::string("k") + std::to_string(ks[i]) + ":" + fmt(med[i]);
      if (i > 0 && med[i] > med[i - 1]) r.pass = false;
    }
    r.measurements = {{"kernels", ks}, {"median_accuracy", med}, {"per_seed", per}};
  }

  std::vector<Generalization> per_seed(Regime regime) {
    std::vector<Generalization> out;
    for (std::uint64_t seed : cfg_.acceptance.seeds) out.push_back(generalization_of(regime, seed));
    return out;
  }

  static double med_of(const std::vector<Generalization>& g, double Generalization::*field) {
    std::vector<double> v;
    for (const auto& x : g) v.push_back(x.*field);
    return median(v);
  }

  static nlohmann::ordered_json gen_json(const std::vector<Generalization>& g) {
    nlohmann::ordered_json j;
    for (const auto& x : g) j.push_back({{"unseen_quality", x.uq}, {"unseen_family", x.uf}, {"mean", x.mean}});
    return j;
  }

  void generalization(CriterionResult& r) {
    const auto normal = per_seed(Regime::normal);
    const auto twogen = per_seed(Regime::bat_twogen);
    const auto combined = per_seed(Regime::combined);
    const double n = med_of(normal, &Generalization::mean), t = med_of(twogen, &Generalization::mean),
                 c = med_of(combined, &Generalization::mean);
    const double gain = cfg_.acceptance.min_generalization_gain, slack = cfg_.acceptance.combined_slack;
    r.pass = t >= n + gain && c >= t - slack;
    r.detail = "median unseen AUC normal " + fmt(n) + ", two-gen " + fmt(t) + " (gain " + fmt(t - n) + " vs " +
               fmt(gain, 2) + "), combined " + fmt(c) + " (>= two-gen - " + fmt(slack, 2) + ")";
    r.measurements = {{"normal", gen_json(normal)},
                      {"bat_twogen", gen_json(twogen)},
                      {"combined", gen_json(combined)},
                      {"median_mean_auc", {{"normal", n}, {"bat_twogen", t}, {"combined", c}}}};
  }

  void augmentation(CriterionResult& r) {
    const auto normal = per_seed(Regime::normal);
    const auto twogen = per_seed(Regime::bat_twogen);
    const double nq = med_of(normal, &Generalization::uq), nf = med_of(normal, &Generalization::uf);
    const double tf = med_of(twogen, &Generalization::uf);
    r.pass = true;
    r.detail = "baseline uq " + fmt(nq) + " uf " + fmt(nf) + ", two-gen uf " + fmt(tf) + ";";
    r.measurements["normal"] = gen_json(normal);
    r.measurements["bat_twogen"] = gen_json(twogen);
    for (const auto& name : cfg_.acceptance.augment_regimes) {
      const auto g = per_seed(regime_from_string(name));
      const double q = med_of(g, &Generalization::uq), f = med_of(g, &Generalization::uf);
      const bool quality_ok = q > nq, family_ok = f - nf < tf - nf;
      r.pass = r.pass && quality_ok && family_ok;
      r.detail += " " + name + " uq " + fmt(q) + (quality_ok ? "" : "(no gain)") + " uf " + fmt(f) +
                  (family_ok ? "" : "(>= two-gen)");
      r.measurements[name] = gen_json(g);
    }
  }

  void transfer(CriterionResult& r) {
    const LabeledSet& data = attack_data();
    const std::vector<std::uint64_t>& s = cfg_.acceptance.seeds;
    const std::uint64_t a = s.front(), b = s.size() > 1 ? s[1] : s.front() + 1;
    const Detector da = detector(Regime::normal, a), db = detector(Regime::normal, b);
    const std::vector<const Detector*> models{&da, &db};
    const double thr = cfg_.eval.threshold;
    const TransferMatrix blur = transfer_matrix(models, blur_spec(0), data, thr);
    const TransferMatrix add = transfer_matrix(models, fgsm_spec(), data, thr);
    bool structure = true, vs_fgsm = true;
    for (std::size_t t = 0; t < 2; ++t) {
      structure = structure && blur.adv_accuracy[t][t] < blur.adv_accuracy[1 - t][t];
      vs_fgsm = vs_fgsm && blur.adv_accuracy[t][t] <= add.adv_accuracy[t][t];
    }
    r.pass = structure && vs_fgsm;
    r.detail = "blur diag " + fmt(blur.adv_accuracy[0][0]) + "/" + fmt(blur.adv_accuracy[1][1]) + " < off-diag " +
               fmt(blur.adv_accuracy[1][0]) + "/" + fmt(blur.adv_accuracy[0][1]) + (structure ? "" : " (violated)") +
               "; fgsm diag " + fmt(add.adv_accuracy[0][0]) + "/" + fmt(add.adv_accuracy[1][1]) +
               (vs_fgsm ? " >= blur diag" : " (blur diag higher)");
    r.measurements = {{"blur", transfer_to_json(blur, blur_spec(0))}, {"fgsm", transfer_to_json(add, fgsm_spec())}};
  }

  void determinism(CriterionResult& r) {
    const fs::path base = fs::path(cfg_.out) / "acceptance-determinism";
    const fs::path work = base / "work", first = base / "first";
    fs::remove_all(base);
    auto run_once = [&]() {
      ExperimentConfig c = cfg_;
      c.out = (work / "runs").string();
      c.data.root = (work / "data").string();
      c.data.synth.train_per_family = 12;
      c.data.synth.val_per_family = 4;
      c.data.synth.test_per_family = 6;
      c.data.synth.height = c.data.synth.width = 32;
      c.train.detector.height = c.train.detector.width = 32;
      c.train.generator.height = c.train.generator.width = 32;
      c.train.batch_size = 8;
      c.attack.max_samples = 6;
      c.attack.kernel_sweep = {3, 5};
      std::ostringstream quiet;
      cmd_synth(c, quiet);
      std::vector<std::string> ckpts;
      for (auto [regime, epochs] : {std::pair{Regime::normal, 2}, std::pair{Regime::bat_twogen, 1}}) {
        c.train.regime = regime;
        c.train.epochs = epochs;
        ckpts.push_back(cmd_train(c, quiet).string());
      }
      cmd_eval(c, ckpts, quiet);
      cmd_attack(c, {ckpts.front()}, quiet);
    };
    run_once();
    fs::rename(work, first);
    run_once();
    auto volatile_file = [](const fs::path& p) {
      return p.filename() == "run_info.json" || p.filename() == "train_log.jsonl";
    };
    int compared = 0, differing = 0, checkpoints = 0, reports = 0, manifests = 0;
    std::string first_diff;
    for (const auto& e : fs::recursive_directory_iterator(first)) {
      if (!e.is_regular_file() || volatile_file(e.path())) continue;
      const fs::path rel = fs::relative(e.path(), first);
      auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
      };
      ++compared;
      const std::string name = rel.filename().string();
      checkpoints += name.find(".ckpt.json") != std::string::npos;
      reports += name == "report.json";
      manifests += name == "manifest.jsonl";
      if (!fs::exists(work / rel) || slurp(e.path()) != slurp(work / rel)) {
        ++differing;
        if (first_diff.empty()) first_diff = rel.string();
      }
    }
    r.pass = differing == 0 && checkpoints >= 4 && reports >= 2 && manifests >= 2;
    r.detail = std::to_string(compared) + " files compared across two runs (" + std::to_string(checkpoints) +
               " checkpoints, " + std::to_string(manifests) + " manifests, " + std::to_string(reports) +
               " reports); " + std::to_string(differing) + " differ" + (first_diff.empty() ? "" : ", e.g. " + first_diff);
    r.measurements = {{"compared", compared}, {"differing", differing}};
  }
};

}  // namespace

std::string CriterionResult::line() const {
  std::string s = std::string(pass ? "[PASS] " : "[FAIL] ") + std::to_string(id) + " " + name + ": " + detail + " (" +
                  fmt(seconds, 1) + "s";
  if (budget_seconds > 0) s += " / " + fmt(budget_seconds, 0) + "s";
  return s + ")";
}

bool AcceptanceSummary::pass() const {
  return std::all_of(criteria.begin(), criteria.end(), [](const CriterionResult& c) { return c.pass; });
}

nlohmann::ordered_json AcceptanceSummary::to_json() const {
  nlohmann::ordered_json j;
  j["schema"] = "advblur-acceptance";
  j["version"] = 1;
  j["pass"] = pass();
  for (const auto& c : criteria)
    j["criteria"].push_back({{"id", c.id},
                             {"name", c.name},
                             {"pass", c.pass},
                             {"detail", c.detail},
                             {"seconds", c.seconds},
                             {"budget_seconds", c.budget_seconds},
                             {"measurements", c.measurements}});
  return j;
}

const std::vector<std::string>& criterion_names() { return kNames; }

AcceptanceSummary run_acceptance(const ExperimentConfig& cfg, const AcceptanceOptions& options) {
  cfg.validate();
  std::vector<int> ids;
  if (options.only.empty()) {
    for (int i = 1; i <= int(kNames.size()); ++i) ids.push_back(i);
  } else {
    for (const auto& o : options.only) {
      int id = 0;
      for (std::size_t i = 0; i < kNames.size(); ++i)
        if (o == kNames[i] || o == std::to_string(i + 1)) id = int(i) + 1;
      require(id > 0, ErrorKind::config, "unknown criterion '" + o + "'");
      if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
    }
    std::sort(ids.begin(), ids.end());
  }
  // Criteria that train detectors need the dataset; fail early with the synth hint.
  if (std::any_of(ids.begin(), ids.end(), [](int i) { return i >= 3 && i <= 7; })) require_dataset(cfg);

  std::ostream null_stream(nullptr);
  std::ostream& progress = options.progress ? *options.progress : null_stream;
  Suite suite(cfg, progress);
  AcceptanceSummary summary;
  nlohmann::json identity = cfg.to_json();
  identity["only"] = ids;
  summary.dir = run_dir(cfg, "reproduce", identity);
  for (int id : ids) {
    progress << "criterion " << id << " " << kNames[std::size_t(id - 1)] << "\n" << std::flush;
    summary.criteria.push_back(suite.run(id));
    if (options.results) *options.results << summary.criteria.back().line() << "\n" << std::flush;
  }
  fs::create_directories(summary.dir);
  write_text_atomic(summary.dir / "acceptance.json", summary.to_json().dump(2) + "\n");
  return summary;
}

}  // namespace advblur
