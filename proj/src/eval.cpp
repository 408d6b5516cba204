#include "eval.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "errors.hpp"

namespace advblur {

double auc(std::span<const double> scores, std::span<const int> labels) {
  require(scores.size() == labels.size(), ErrorKind::validation, "scores/labels size mismatch");
  std::size_t n_pos = 0;
  for (int l : labels) {
    validate_label(l);
    n_pos += std::size_t(l == 1);
  }
  const std::size_t n_neg = labels.size() - n_pos;
  require(n_pos > 0 && n_neg > 0, ErrorKind::undefined_metric, "AUC needs at least one positive and one negative");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of (1-based, tie-averaged) ranks of the positives, kept doubled to stay integral.
  long double rank_sum2 = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const long double avg2 = (long double)(i + 1) + (long double)(j + 1);
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]] == 1) rank_sum2 += avg2;
    i = j + 1;
  }
  const long double u = rank_sum2 / 2 - (long double)n_pos * (n_pos + 1) / 2;
  return double(u / ((long double)n_pos * n_neg));
}

double accuracy(std::span<const double> scores, std::span<const int> labels, double threshold) {
  require(scores.size() == labels.size(), ErrorKind::validation, "scores/labels size mismatch");
  if (scores.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    validate_label(labels[i]);
    correct += std::size_t((scores[i] >= threshold ? 1 : 0) == labels[i]);
  }
  return double(correct) / double(scores.size());
}

nlohmann::json AttackSpec::to_json() const {
  nlohmann::json j = budget.to_json();
  if (family == AttackFamily::blur) {
    j["kernel"] = blur.k;
    j["boundary"] = to_string(blur.boundary);
    j["normalize"] = blur.normalize;
    j["sigma_init"] = sigma_init;
  }
  return j;
}

Image craft(const Classifier& model, const Image& x, int label, const AttackSpec& attack) {
  switch (attack.family) {
    case AttackFamily::additive: return pgd(model, x, label, attack.budget).image();
    case AttackFamily::blur:
      return blur_attack(model, x, label, attack.budget, SigmaMap::constant(x.h, x.w, attack.sigma_init), attack.blur,
                         attack.bounds)
          .example.image();
    case AttackFamily::spatial: return spatial_attack(model, x, label, attack.budget).example.image();
  }
  return x;
}

TransferMatrix transfer_matrix(std::span<const Detector* const> models, const AttackSpec& attack,
                               const LabeledSet& data, double threshold) {
  require(models.size() >= 2, ErrorKind::validation, "transfer matrix needs at least two models");
  require(data.size() > 0, ErrorKind::validation, "transfer matrix needs data");
  TransferMatrix m;
  for (const Detector* d : models) {
    m.models.push_back(d->id());
    m.clean_accuracy.push_back(accuracy(d->scores(data.images), data.labels, threshold));
  }
  for (const Detector* source : models) {
    std::vector<Image> adv;
    adv.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) adv.push_back(craft(*source, data.images[i], data.labels[i], attack));
    std::vector<double> row;
    for (const Detector* target : models) row.push_back(accuracy(target->scores(adv), data.labels, threshold));
    m.adv_accuracy.push_back(std::move(row));
  }
  return m;
}

CellMetrics evaluate_cell(const Detector& model, const LabeledSet& data, const std::string& train_condition,
                          const std::string& family, const std::string& quality, double threshold) {
  CellMetrics c;
  c.train_condition = train_condition;
  c.family = family;
  c.quality = quality;
  c.n = data.size();
  const bool has_pos = std::find(data.labels.begin(), data.labels.end(), 1) != data.labels.end();
  const bool has_neg = std::find(data.labels.begin(), data.labels.end(), 0) != data.labels.end();
  if (!has_pos || !has_neg) {
    c.skipped = true;
    c.skip_reason = data.size() == 0 ? "empty cell" : "single-class cell";
    return c;
  }
  const std::vector<double> s = model.scores(data.images);
  c.auc = auc(s, data.labels);
  c.acc = accuracy(s, data.labels, threshold);
  return c;
}

nlohmann::ordered_json transfer_to_json(const TransferMatrix& m, const AttackSpec& attack) {
  nlohmann::ordered_json j;
  j["attack"] = to_string(attack.family);
  j["budget"] = attack.to_json();
  j["models"] = m.models;
  j["clean_accuracy"] = m.clean_accuracy;
  j["adv_accuracy"] = m.adv_accuracy;
  return j;
}

nlohmann::ordered_json EvalReport::to_json() const {
  validate();
  nlohmann::ordered_json j;
  j["schema"] = "advblur-report";
  j["version"] = kSchemaVersion;
  j["metadata"] = metadata;
  nlohmann::ordered_json cs = nlohmann::ordered_json::array();
  for (const auto& c : cells) {
    nlohmann::ordered_json cj;
    cj["train_condition"] = c.train_condition;
    cj["family"] = c.family;
    cj["quality"] = c.quality;
    cj["n"] = c.n;
    if (c.skipped) {
      cj["skipped"] = true;
      cj["skip_reason"] = c.skip_reason;
    } else {
      cj["auc"] = c.auc;
      cj["acc"] = c.acc;
    }
    cs.push_back(cj);
  }
  j["cells"] = cs;
  j["attacks"] = attacks;
  return j;
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-18s %-10s %-7s %6s %8s %8s\n", "train", "family", "quality", "n", "auc", "acc");
  os << line;
  for (const auto& c : cells) {
    if (c.skipped)
      std::snprintf(line, sizeof line, "%-18s %-10s %-7s %6zu %8s %8s\n", c.train_condition.c_str(), c.family.c_str(),
                    c.quality.c_str(), c.n, "skip", "skip");
    else
      std::snprintf(line, sizeof line, "%-18s %-10s %-7s %6zu %8.4f %8.4f\n", c.train_condition.c_str(),
                    c.family.c_str(), c.quality.c_str(), c.n, c.auc, c.acc);
    os << line;
  }
  return os.str();
}

void EvalReport::validate() const {
  for (const auto& c : cells) {
    if (c.skipped) continue;
    require(c.auc >= 0.0 && c.auc <= 1.0 && c.acc >= 0.0 && c.acc <= 1.0, ErrorKind::numeric,
            "metric outside [0,1] in cell " + c.family + "/" + c.quality);
  }
}

}  // namespace advblur
