#include <cmath>

#include "helpers.hpp"
#include "toy_models.hpp"
#include "train.hpp"

using namespace advblur;
using testutil::error_kind;
using testutil::random_image;
namespace fs = std::filesystem;

namespace {

/// Dark reals and bright fakes with mild noise.
LabeledSet separable(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.03);
  LabeledSet s;
  for (int i = 0; i < n; ++i) {
    const int y = i % 2;
    Image x(3, 16, 16);
    for (double& v : x.data) v = std::clamp((y ? 0.7 : 0.3) + noise(rng), 0.0, 1.0);
    s.images.push_back(std::move(x));
    s.labels.push_back(y);
  }
  return s;
}

TrainConfig tiny_config(Regime r) {
  TrainConfig c;
  c.regime = r;
  c.epochs = 2;
  c.batch_size = 4;
  c.seed = 3;
  c.detector = testutil::small_arch(16);
  c.detector.widths = {4, 8};
  c.generator.height = c.generator.width = 16;
  c.generator.base_width = 2;
  c.generator.res_blocks = 1;
  c.additive = PerturbationBudget::additive(0.0);
  c.blur = PerturbationBudget::blur(0.0);
  c.spatial = PerturbationBudget::spatial(0.0, 1);
  return c;
}

double accuracy(const Detector& d, const LabeledSet& s) {
  const auto p = d.scores(s.images);
  int ok = 0;
  for (std::size_t i = 0; i < p.size(); ++i) ok += (p[i] >= 0.5) == (s.labels[i] == kLabelFake);
  return static_cast<double>(ok) / static_cast<double>(p.size());
}

std::vector<double> step_grad(Regime r, double lambda, const LabeledSet& batch) {
  TrainConfig c = tiny_config(r);
  c.lambda = lambda;
  TrainState st(c);
  std::mt19937_64 rng(1);
  std::vector<double> g(st.detector.num_params(), 0.0);
  detector_step_gradient(st, c, batch.images, batch.labels, rng, g);
  return g;
}

}  // namespace

TEST_SUITE("train") {
  TEST_CASE("regime names round trip") {
    for (const char* name : {"normal", "aat", "sat", "bat_grad", "bat_gen", "bat_twogen", "combined", "aug_noise",
                             "aug_blur", "aug_jpeg", "aug_combined"})
      CHECK(std::string(to_string(regime_from_string(name))) == name);
    CHECK(error_kind([] { regime_from_string("bat"); }) == ErrorKind::config);
  }

  TEST_CASE("separable toy data is learned within five epochs") {
    TrainConfig c = tiny_config(Regime::normal);
    c.epochs = 5;
    c.optimizer.lr = 1e-2;
    c.optimizer.decay_every = 0;
    const LabeledSet data = separable(32, 1);
    TrainState st(c);
    const TrainResult r = train(st, c, data, nullptr);
    CHECK(r.log.size() == 5);
    CHECK(accuracy(st.detector, data) == 1.0);
    CHECK(r.log.back().loss_clean < r.log.front().loss_clean);
  }

  TEST_CASE("lambda zero reduces the mixing regimes to clean training") {
    const LabeledSet b = separable(4, 2);
    const auto clean = step_grad(Regime::normal, 1.0, b);
    for (Regime r : {Regime::aat, Regime::sat, Regime::bat_grad, Regime::combined})
      CHECK(step_grad(r, 0.0, b) == clean);
  }

  TEST_CASE("zero-budget adversarial term doubles the clean gradient") {
    const LabeledSet b = separable(4, 3);
    const auto clean = step_grad(Regime::normal, 1.0, b);
    const auto aat = step_grad(Regime::aat, 1.0, b);
    REQUIRE(aat.size() == clean.size());
    for (std::size_t i = 0; i < clean.size(); ++i) CHECK(aat[i] == doctest::Approx(2.0 * clean[i]).epsilon(1e-9));
  }

  TEST_CASE("training is deterministic for a fixed seed") {
    const LabeledSet data = separable(8, 4);
    for (Regime r : {Regime::normal, Regime::bat_twogen, Regime::aug_combined}) {
      const TrainConfig c = tiny_config(r);
      TrainState a(c), b(c);
      train(a, c, data, nullptr);
      train(b, c, data, nullptr);
      CHECK(a.detector.params() == b.detector.params());
      if (a.gens)
        for (std::size_t g = 0; g < a.gens->size(); ++g) CHECK(a.gens->at(g).params() == b.gens->at(g).params());
    }
  }

  TEST_CASE("interrupted training resumes to the same parameters") {
    const LabeledSet data = separable(8, 5);
    TrainConfig c = tiny_config(Regime::bat_twogen);
    c.epochs = 3;
    TrainState full(c);
    train(full, c, data, nullptr);

    const fs::path dir = testutil::temp_dir("resume");
    TrainOptions first;
    first.out_dir = dir;
    first.stop_after_epochs = 1;
    TrainState part(c);
    const TrainResult r1 = train(part, c, data, nullptr, first);
    CHECK_FALSE(r1.resumed);
    for (const auto& f : checkpoint_files(c.regime)) CHECK(fs::exists(dir / f));

    TrainOptions second;
    second.out_dir = dir;
    TrainState resumed(c);
    const TrainResult r2 = train(resumed, c, data, nullptr, second);
    CHECK(r2.resumed);
    CHECK(resumed.epoch == 3);
    CHECK(resumed.step == full.step);
    CHECK(resumed.detector.params() == full.detector.params());
    for (std::size_t g = 0; g < 2; ++g) CHECK(resumed.gens->at(g).params() == full.gens->at(g).params());
  }

  TEST_CASE("resuming with a different regime is rejected") {
    const LabeledSet data = separable(8, 6);
    const fs::path dir = testutil::temp_dir("mismatch");
    TrainConfig c = tiny_config(Regime::bat_twogen);
    c.epochs = 1;
    TrainOptions o;
    o.out_dir = dir;
    TrainState a(c);
    train(a, c, data, nullptr, o);
    TrainConfig other = tiny_config(Regime::bat_gen);
    TrainState b(other);
    CHECK(error_kind([&] { load_train_state(dir, b, other); }) == ErrorKind::config);
  }

  TEST_CASE("checkpoint files per regime") {
    CHECK(checkpoint_files(Regime::normal).size() == 1);
    CHECK(checkpoint_files(Regime::aug_jpeg).size() == 1);
    CHECK(checkpoint_files(Regime::bat_gen).size() == 2);
    CHECK(checkpoint_files(Regime::combined).size() == 3);
    CHECK(checkpoint_files(Regime::bat_twogen).size() == 3);
  }

  TEST_CASE("state shape follows the regime") {
    CHECK_FALSE(TrainState(tiny_config(Regime::normal)).gens.has_value());
    CHECK(TrainState(tiny_config(Regime::bat_gen)).gens->size() == 1);
    const TrainState two(tiny_config(Regime::bat_twogen));
    CHECK(two.gens->size() == 2);
    CHECK(two.gen_opts.size() == 2);
    // The two generators start from different weights.
    CHECK(two.gens->at(0).params() != two.gens->at(1).params());
  }

  TEST_CASE("checkpoint round trip keeps detector outputs") {
    const TrainConfig c = tiny_config(Regime::normal);
    TrainState st(c);
    const Checkpoint ck = detector_checkpoint(st, c);
    const Detector d = detector_from_checkpoint(Checkpoint::from_json(ck.to_json()));
    const Image x = random_image(3, 16, 16, 9);
    CHECK(d.logits(x) == st.detector.logits(x));
  }

  TEST_CASE("derived seeds differ per stream") {
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
    CHECK(derive_seed(5, 3) == derive_seed(5, 3));
  }

  TEST_CASE("config validation") {
    TrainConfig c = tiny_config(Regime::normal);
    c.lambda = -1.0;
    CHECK(error_kind([&] { c.validate(); }) == ErrorKind::config);
    c = tiny_config(Regime::normal);
    c.batch_size = 0;
    CHECK(error_kind([&] { c.validate(); }) == ErrorKind::config);
    const TrainConfig d = tiny_config(Regime::bat_twogen);
    CHECK(TrainConfig::from_json(d.to_json()).to_json() == d.to_json());
  }
}
