#include <cmath>

#include "eval.hpp"
#include "helpers.hpp"
#include "toy_models.hpp"

using namespace advblur;
using testutil::error_kind;

TEST_SUITE("eval") {
  TEST_CASE("auc examples") {
    const std::vector<double> ordered{0.1, 0.2, 0.8, 0.9};
    const std::vector<int> labels{0, 0, 1, 1};
    CHECK(auc(ordered, labels) == 1.0);
    const std::vector<double> equal(4, 0.3);
    CHECK(auc(equal, labels) == 0.5);
    const std::vector<double> mixed{0.1, 0.4, 0.35, 0.8};
    CHECK(auc(mixed, labels) == 0.75);
    CHECK(oracle::brute_auc(mixed, labels) == 0.75);
  }

  TEST_CASE("auc needs both classes and valid labels") {
    const std::vector<double> s{0.1, 0.2};
    CHECK(error_kind([&] { auc(s, std::vector<int>{1, 1}); }) == ErrorKind::undefined_metric);
    CHECK(error_kind([&] { auc(s, std::vector<int>{0, 0}); }) == ErrorKind::undefined_metric);
    CHECK(error_kind([&] { auc(s, std::vector<int>{0, 2}); }) == ErrorKind::validation);
  }

  TEST_CASE("auc equals the pairwise count, including ties") {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> coarse(0, 6), label(0, 1);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> s;
      std::vector<int> y;
      const int n = 2 + trial % 30;
      for (int i = 0; i < n; ++i) {
        s.push_back(coarse(rng) / 6.0);
        y.push_back(label(rng));
      }
      y[0] = 0;
      y[1] = 1;
      CHECK(auc(s, y) == doctest::Approx(oracle::brute_auc(s, y)).epsilon(1e-14));
    }
  }

  TEST_CASE("rank reversal and monotone invariance") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> coarse(0, 9);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> s, neg, mono;
      std::vector<int> y;
      for (int i = 0; i < 25; ++i) {
        const double v = trial % 2 ? coarse(rng) / 9.0 : u(rng);
        s.push_back(v);
        neg.push_back(-v);
        mono.push_back(std::exp(3.0 * v) - 7.0);
        y.push_back(i % 3 == 0);
      }
      CHECK(auc(s, y) + auc(neg, y) == 1.0);
      CHECK(auc(mono, y) == auc(s, y));
    }
  }

  TEST_CASE("accuracy examples") {
    CHECK(accuracy(std::vector<double>{0.9, 0.1}, std::vector<int>{1, 0}) == 1.0);
    CHECK(accuracy(std::vector<double>(5, 0.4), std::vector<int>(5, 1)) == 0.0);
    // Hand count: predictions 1,0,1,1,0,0 against labels 1,0,0,1,1,0 -> 4 of 6 correct.
    const std::vector<double> s{0.7, 0.2, 0.5, 0.99, 0.49, 0.0};
    const std::vector<int> y{1, 0, 0, 1, 1, 0};
    CHECK(accuracy(s, y) == doctest::Approx(4.0 / 6.0));
    // At 0.6 and at 0.3 exactly one of the two mistakes flips.
    CHECK(accuracy(s, y, 0.6) == doctest::Approx(5.0 / 6.0));
    CHECK(accuracy(s, y, 0.3) == doctest::Approx(5.0 / 6.0));
  }

  TEST_CASE("transfer matrix at zero budget broadcasts clean accuracy") {
    LabeledSet data;
    for (int i = 0; i < 12; ++i) {
      data.images.push_back(testutil::random_image(3, 16, 16, 100 + i));
      data.labels.push_back(i % 2);
    }
    Detector a(testutil::small_arch(), "a"), b(testutil::small_arch(), "b");
    a.init(1);
    b.init(2);
    const std::vector<const Detector*> models{&a, &b};
    AttackSpec spec;
    spec.family = AttackFamily::additive;
    spec.budget = PerturbationBudget::additive(0.0);
    const TransferMatrix m = transfer_matrix(models, spec, data);
    for (std::size_t s = 0; s < 2; ++s)
      for (std::size_t t = 0; t < 2; ++t) CHECK(m.adv_accuracy[s][t] == m.clean_accuracy[t]);
    const std::vector<const Detector*> one{&a};
    CHECK(error_kind([&] { transfer_matrix(one, spec, data); }) == ErrorKind::validation);
  }

  TEST_CASE("cells without both classes are marked skipped") {
    Detector d(testutil::small_arch(), "d");
    d.init(3);
    LabeledSet only_fakes;
    only_fakes.images.push_back(testutil::random_image(3, 16, 16, 5));
    only_fakes.labels.push_back(1);
    const CellMetrics c = evaluate_cell(d, only_fakes, "normal", "seam", "q_mid");
    CHECK(c.skipped);
    const CellMetrics e = evaluate_cell(d, LabeledSet{}, "normal", "seam", "q_mid");
    CHECK(e.skipped);
    EvalReport r;
    r.cells = {c, e};
    const auto j = r.to_json();
    CHECK(j["schema"] == "advblur-report");
    CHECK(j["cells"][0]["skipped"] == true);
  }

  TEST_CASE("report metrics are reproducible and validated") {
    Detector d(testutil::small_arch(), "d");
    d.init(4);
    LabeledSet data;
    for (int i = 0; i < 10; ++i) {
      data.images.push_back(testutil::random_image(3, 16, 16, 200 + i));
      data.labels.push_back(i % 2);
    }
    EvalReport a, b;
    a.cells.push_back(evaluate_cell(d, data, "normal", "checker", "q_mid"));
    b.cells.push_back(evaluate_cell(d, data, "normal", "checker", "q_mid"));
    CHECK(a.to_json().dump() == b.to_json().dump());
    EvalReport bad;
    CellMetrics c;
    c.auc = 1.5;
    bad.cells.push_back(c);
    CHECK(error_kind([&] { bad.validate(); }) == ErrorKind::numeric);
  }
}
