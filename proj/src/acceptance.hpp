#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "config.hpp"
#include "json.hpp"

namespace advblur {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
  double budget_seconds = 0.0;  // 0 = no runtime bound
  nlohmann::ordered_json measurements = nlohmann::ordered_json::object();

  /// One line: "[PASS] 3 attack-contracts: ... (12.3s / 300s)".
  std::string line() const;
};

struct AcceptanceOptions {
  std::vector<std::string> only;  // names or numbers; empty runs everything
  std::ostream* progress = nullptr;
  std::ostream* results = nullptr;  // receives each line as soon as its criterion finishes
};

struct AcceptanceSummary {
  std::vector<CriterionResult> criteria;
  std::filesystem::path dir;
  bool pass() const;
  nlohmann::ordered_json to_json() const;
};

/// Criterion names accepted by --only, in order.
const std::vector<std::string>& criterion_names();

/// Runs the selected criteria; needs the configured dataset to exist.
AcceptanceSummary run_acceptance(const ExperimentConfig& cfg, const AcceptanceOptions& options);

}  // namespace advblur
