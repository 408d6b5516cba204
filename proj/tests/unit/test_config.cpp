#include <fstream>

#include "config.hpp"
#include "experiment.hpp"
#include "helpers.hpp"

using namespace advblur;
using testutil::error_kind;
namespace fs = std::filesystem;

namespace {

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

fs::path write_file(const std::string& name, const std::string& text) {
  const fs::path p = testutil::temp_dir("config") / name;
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("defaults validate") {
    const ExperimentConfig c;
    CHECK_NOTHROW(c.validate());
    CHECK(c.train.epochs == 30);
    CHECK(c.train.optimizer.lr == 5e-4);
    CHECK(c.train.optimizer.weight_decay == 5e-4);
    CHECK(c.train.generator_optimizer.lr == 2e-3);
    CHECK(c.train.blur_spec.k == 9);
  }

  TEST_CASE("json round trip is lossless") {
    ExperimentConfig c;
    c.train.regime = Regime::bat_twogen;
    c.attack.kernel_sweep = {3, 7};
    c.eval.threshold = 0.4;
    c.set_seed(17);
    const ExperimentConfig d = ExperimentConfig::from_json(c.to_json());
    CHECK(d.to_json() == c.to_json());
    CHECK(content_hash(d.to_json()) == content_hash(c.to_json()));
    CHECK(content_hash(d.to_json()).size() == 16);
  }

  TEST_CASE("unknown keys are rejected at every level") {
    CHECK(error_kind([] { ExperimentConfig::from_json({{"sed", 1}}); }) == ErrorKind::config);
    CHECK(message_of([] { ExperimentConfig::from_json({{"sed", 1}}); }).find("sed") != std::string::npos);
    CHECK(error_kind([] { ExperimentConfig::from_json({{"train", {{"lamda", 1.0}}}}); }) == ErrorKind::config);
    CHECK(error_kind([] {
            ExperimentConfig::from_json({{"train", {{"optimizer", {{"learning_rate", 1.0}}}}}});
          }) == ErrorKind::config);
    CHECK(error_kind([] { ExperimentConfig::from_json({{"eval", {{"split", "test"}, {"x", 1}}}}); }) ==
          ErrorKind::config);
  }

  TEST_CASE("partial nested objects keep the remaining defaults") {
    const ExperimentConfig c = ExperimentConfig::from_json({{"train", {{"optimizer", {{"lr", 1e-3}}}}}});
    CHECK(c.train.optimizer.lr == 1e-3);
    CHECK(c.train.optimizer.weight_decay == 5e-4);
    CHECK(c.train.epochs == ExperimentConfig().train.epochs);
  }

  TEST_CASE("the seed lives only at the top level") {
    CHECK(error_kind([] { ExperimentConfig::from_json({{"train", {{"seed", 3}}}}); }) == ErrorKind::config);
    const ExperimentConfig c = ExperimentConfig::from_json({{"seed", 9}});
    CHECK(c.train.seed == 9);
  }

  TEST_CASE("missing file and invalid json name the path") {
    const std::string missing = "/nonexistent/advblur/cfg.json";
    CHECK(error_kind([&] { ExperimentConfig::load(missing); }) == ErrorKind::config);
    CHECK(message_of([&] { ExperimentConfig::load(missing); }).find(missing) != std::string::npos);
    const fs::path bad = write_file("bad.json", "{\"seed\": ");
    CHECK(error_kind([&] { ExperimentConfig::load(bad); }) == ErrorKind::config);
    CHECK(message_of([&] { ExperimentConfig::load(bad); }).find(bad.string()) != std::string::npos);
    const fs::path wrong = write_file("wrong.json", "{\"train\": {\"regime\": \"bogus\"}}");
    CHECK(message_of([&] { ExperimentConfig::load(wrong); }).find(wrong.string()) != std::string::npos);
  }

  TEST_CASE("invalid values are config errors") {
    CHECK(error_kind([] { ExperimentConfig::from_json({{"attack", {{"kernel_sweep", {4}}}}}); }) ==
          ErrorKind::config);
    CHECK(error_kind([] { ExperimentConfig::from_json({{"eval", {{"threshold", 2.0}}}}); }) == ErrorKind::config);
    CHECK(error_kind([] { ExperimentConfig::from_json({{"eval", {{"families", {"faces"}}}}}); }) ==
          ErrorKind::config);
    CHECK(error_kind([] { ExperimentConfig::from_json({{"out", ""}}); }) == ErrorKind::config);
  }

  TEST_CASE("seed precedence: flag, then environment, then config") {
    CHECK(resolve_seed(1, std::nullopt, nullptr) == 1);
    CHECK(resolve_seed(1, std::nullopt, "") == 1);
    CHECK(resolve_seed(1, std::nullopt, "42") == 42);
    CHECK(resolve_seed(1, 7, "42") == 7);
    CHECK(error_kind([] { resolve_seed(1, std::nullopt, "abc"); }) == ErrorKind::config);
    CHECK(error_kind([] { resolve_seed(1, std::nullopt, "-1"); }) == ErrorKind::config);
    CHECK(error_kind([] { resolve_seed(1, std::nullopt, "12x"); }) == ErrorKind::config);
  }

  TEST_CASE("overrides apply to every seeded component") {
    Overrides o;
    o.seed = 11;
    o.out = "elsewhere";
    o.regime = "aat";
    const ExperimentConfig c = apply_overrides(ExperimentConfig{}, o, "5");
    CHECK(c.seed == 11);
    CHECK(c.train.seed == 11);
    CHECK(c.out == "elsewhere");
    CHECK(c.train.regime == Regime::aat);
    CHECK(apply_overrides(ExperimentConfig{}, Overrides{}, "5").seed == 5);
    Overrides bad;
    bad.regime = "fgsm";
    CHECK(error_kind([&] { apply_overrides(ExperimentConfig{}, bad, nullptr); }) == ErrorKind::config);
  }

  TEST_CASE("shipped configs load and the default file matches the built-in defaults") {
    const std::filesystem::path dir = ADVBLUR_SOURCE_DIR "/configs";
    CHECK(ExperimentConfig::load(dir / "default.json").to_json() == ExperimentConfig{}.to_json());
    const ExperimentConfig smoke = ExperimentConfig::load(dir / "smoke.json");
    CHECK(smoke.train.epochs == 1);
  }
}
