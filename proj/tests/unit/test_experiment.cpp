#include <algorithm>
#include <fstream>
#include <sstream>

#include "checkpoint.hpp"
#include "experiment.hpp"
#include "helpers.hpp"

using namespace advblur;
using testutil::error_kind;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny(const fs::path& root) {
  ExperimentConfig c;
  c.out = (root / "runs").string();
  c.data.root = (root / "data").string();
  SynthSpec& s = c.data.synth;
  s.height = s.width = 32;
  s.train_per_family = 4;
  s.val_per_family = 1;
  s.test_per_family = 2;
  s.blend_radius_min = 6.0;
  s.blend_radius_max = 9.0;
  c.train.epochs = 1;
  c.train.batch_size = 4;
  c.train.detector.height = c.train.detector.width = 32;
  c.train.detector.widths = {4, 8};
  c.train.generator.height = c.train.generator.width = 32;
  c.train.generator.base_width = 2;
  c.train.generator.res_blocks = 1;
  c.attack.kernel_sweep = {3, 5, 9};
  c.attack.max_samples = 4;
  c.eval.families = {"checker", "seam"};
  c.eval.qualities = {"q_raw", "q_low"};
  c.acceptance.gradient_cases = 2;
  c.set_seed(1);
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

/// Shared dataset for the tests below; generated once.
const ExperimentConfig& fixture() {
  static const ExperimentConfig cfg = [] {
    const fs::path root = testutil::temp_dir("experiment");
    ExperimentConfig c = tiny(root);
    std::ostringstream log;
    cmd_synth(c, log);
    return c;
  }();
  return cfg;
}

}  // namespace

TEST_SUITE("experiment") {
  TEST_CASE("synth is idempotent and refuses a different spec") {
    const ExperimentConfig& c = fixture();
    const fs::path manifest = fs::path(c.data.root) / "manifest.jsonl";
    const std::string before = slurp(manifest);
    std::ostringstream log;
    cmd_synth(c, log);
    CHECK(log.str().find("already present") != std::string::npos);
    CHECK(slurp(manifest) == before);
    ExperimentConfig other = c;
    other.data.synth.residual_std = 0.07;
    CHECK(error_kind([&] { cmd_synth(other, log); }) == ErrorKind::config);
  }

  TEST_CASE("missing dataset points at synth") {
    ExperimentConfig c = fixture();
    c.data.root = (testutil::temp_dir("nodata") / "absent").string();
    std::ostringstream log;
    try {
      cmd_train(c, log);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::io);
      CHECK(std::string(e.what()).find("synth") != std::string::npos);
    }
  }

  TEST_CASE("train writes checkpoints, log and metadata") {
    ExperimentConfig c = fixture();
    c.train.regime = Regime::bat_twogen;
    std::ostringstream log;
    const fs::path dir = cmd_train(c, log);
    for (const auto& f : checkpoint_files(Regime::bat_twogen)) CHECK(fs::exists(dir / f));
    CHECK(fs::exists(dir / "config.json"));
    CHECK(fs::exists(dir / "run_info.json"));
    CHECK(dir.filename().string().rfind("train-bat_twogen-s1-", 0) == 0);
    const Checkpoint ck = load_checkpoint(dir / "detector.ckpt.json");
    CHECK(ck.kind == "detector");
    CHECK(ck.seed == 1);
    CHECK(ck.epoch == 1);
  }

  TEST_CASE("zero-budget additive attack leaves accuracy at the clean value") {
    ExperimentConfig c = fixture();
    std::ostringstream log;
    const fs::path run = cmd_train(c, log);
    c.attack.family = AttackFamily::additive;
    c.attack.budget = PerturbationBudget::additive(0.0);
    const fs::path dir = cmd_attack(c, {run.string()}, log);
    const nlohmann::json r = read_json(dir / "report.json");
    REQUIRE(r["attacks"].size() == 1);
    CHECK(r["attacks"][0]["adv_accuracy"] == r["attacks"][0]["clean_accuracy"]);
    CHECK(r["metadata"]["seed"] == 1);
    CHECK(r["metadata"].contains("config_hash"));
    CHECK(r["metadata"].contains("dataset_hash"));
  }

  TEST_CASE("blur attack report covers the kernel sweep") {
    ExperimentConfig c = fixture();
    std::ostringstream log;
    const fs::path run = cmd_train(c, log);
    const fs::path dir = cmd_attack(c, {run.string()}, log);
    const nlohmann::json r = read_json(dir / "report.json");
    std::vector<int> ks;
    for (const auto& e : r["attacks"]) {
      ks.push_back(e["budget"]["kernel"].get<int>());
      CHECK(e.contains("initial_blur_accuracy"));
    }
    std::sort(ks.begin(), ks.end());
    CHECK(ks == std::vector<int>{3, 5, 9});
    CHECK(fs::exists(dir / "adv"));
  }

  TEST_CASE("eval report has one cell per model, family and quality") {
    ExperimentConfig c = fixture();
    std::ostringstream log;
    const fs::path a = cmd_train(c, log);
    c.train.regime = Regime::aug_noise;
    const fs::path b = cmd_train(c, log);
    const fs::path dir = cmd_eval(c, {a.string(), b.string()}, log);
    const nlohmann::json r = read_json(dir / "report.json");
    CHECK(r["cells"].size() == 2 * 2 * 2);
    REQUIRE(r["attacks"].size() == 1);
    CHECK(r["attacks"][0]["kind"] == "transfer");
  }

  TEST_CASE("runs are bitwise reproducible") {
    const fs::path root = testutil::temp_dir("repro");
    ExperimentConfig c1 = fixture();
    c1.out = (root / "a").string();
    ExperimentConfig c2 = fixture();
    c2.out = (root / "b").string();
    std::ostringstream log;
    const fs::path r1 = cmd_train(c1, log), r2 = cmd_train(c2, log);
    CHECK(r1.filename() == r2.filename());
    CHECK(slurp(r1 / "detector.ckpt.json") == slurp(r2 / "detector.ckpt.json"));
    const fs::path e1 = cmd_eval(c1, {r1.string()}, log), e2 = cmd_eval(c2, {r2.string()}, log);
    CHECK(slurp(e1 / "report.json") == slurp(e2 / "report.json"));
  }

  TEST_CASE("grad-check command passes and writes a report") {
    ExperimentConfig c = fixture();
    std::ostringstream log;
    const fs::path dir = cmd_grad_check(c, log);
    CHECK(read_json(dir / "report.json")["pass"] == true);
  }

  TEST_CASE("checkpoint paths resolve from run directories") {
    ExperimentConfig c = fixture();
    std::ostringstream log;
    const fs::path run = cmd_train(c, log);
    CHECK(resolve_detector_checkpoint(run) == run / "detector.ckpt.json");
    CHECK(error_kind([] { resolve_detector_checkpoint("/nonexistent/ckpt"); }) == ErrorKind::io);
  }
}
