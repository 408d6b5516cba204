#pragma once

#include <span>
#include <string>
#include <vector>

#include "attacks.hpp"
#include "data.hpp"
#include "detector.hpp"
#include "json.hpp"

namespace advblur {

/// Rank-based (Mann-Whitney) AUC; tied scores contribute 1/2.
double auc(std::span<const double> scores, std::span<const int> labels);

/// Fraction of samples where (score >= threshold) matches label == 1.
double accuracy(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

struct AttackSpec {
  AttackFamily family = AttackFamily::blur;
  PerturbationBudget budget;
  BlurSpec blur;            // blur family only
  double sigma_init = 1.0;  // blur family only
  RhoBounds bounds;

  nlohmann::json to_json() const;
};

/// Crafts one adversarial image against `model`.
Image craft(const Classifier& model, const Image& x, int label, const AttackSpec& attack);

struct TransferMatrix {
  std::vector<std::string> models;
  std::vector<std::vector<double>> adv_accuracy;  // [source][target]
  std::vector<double> clean_accuracy;             // per target
};

/// Entry (s, t): accuracy of model t on examples crafted against model s.
TransferMatrix transfer_matrix(std::span<const Detector* const> models, const AttackSpec& attack,
                               const LabeledSet& data, double threshold = 0.5);

struct CellMetrics {
  std::string train_condition;
  std::string family;
  std::string quality;
  bool skipped = false;
  std::string skip_reason;
  double auc = 0.0;
  double acc = 0.0;
  std::size_t n = 0;
};

struct EvalReport {
  static constexpr int kSchemaVersion = 1;

  std::vector<CellMetrics> cells;
  std::vector<nlohmann::json> attacks;  // serialized transfer matrices and sweeps
  nlohmann::json metadata = nlohmann::json::object();

  nlohmann::ordered_json to_json() const;
  /// Human-readable fixed-width table of the cells.
  std::string to_table() const;
  void validate() const;
};

/// Scores `data` with `model`; empty single-class cells are marked skipped.
CellMetrics evaluate_cell(const Detector& model, const LabeledSet& data, const std::string& train_condition,
                          const std::string& family, const std::string& quality, double threshold = 0.5);

nlohmann::ordered_json transfer_to_json(const TransferMatrix& m, const AttackSpec& attack);

}  // namespace advblur
