// Copyright 2026 The mlcl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mlcl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

#include "mlcl/errors.hpp"
#include "mlcl/metrics_json.hpp"

namespace mlcl::metrics {

void ScoredPredictions::validate() const {
  if (scores.rows() != truth.rows() || scores.cols() != truth.cols()) {
    throw DimensionError("scores and truth differ in shape");
  }
  if (!scores.all_finite()) throw NumericError("non-finite prediction score");
}

PRCurve pr_curve(std::vector<RankedItem> items, std::size_t positives_total) {
  std::sort(items.begin(), items.end(),
            [](const RankedItem& a, const RankedItem& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.order < b.order;
            });
  PRCurve curve;
  curve.positives_total = positives_total;
  curve.points.reserve(items.size());
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < items.size(); ++rank) {
    if (items[rank].positive) ++hits;
    PRPoint pt;
    pt.precision = static_cast<double>(hits) / static_cast<double>(rank + 1);
    pt.recall = positives_total == 0 ? 0.0
                                     : static_cast<double>(hits) /
                                           static_cast<double>(positives_total);
    pt.positive = items[rank].positive;
    curve.points.push_back(pt);
  }
  return curve;
}

std::optional<double> area(const PRCurve& curve) {
  if (curve.positives_total == 0) return std::nullopt;
  // dr is the constant 1/NP at every positive, so it is factored out.
  double precision_sum = 0.0;
  for (const PRPoint& pt : curve.points) {
    if (pt.positive) precision_sum += pt.precision;
  }
  return precision_sum / static_cast<double>(curve.positives_total);
}

std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const std::uint8_t> truth) {
  if (scores.size() != truth.size()) {
    throw DimensionError("average_precision: scores and truth differ in length");
  }
  std::vector<RankedItem> items(scores.size());
  std::size_t positives = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    items[i] = {scores[i], i, truth[i] != 0};
    positives += truth[i] != 0 ? 1 : 0;
  }
  return area(pr_curve(std::move(items), positives));
}

double macro_map(std::span<const std::optional<double>> ap) {
  double total = 0.0;
  std::size_t defined = 0;
  for (const auto& v : ap) {
    if (v) {
      total += *v;
      ++defined;
    }
  }
  if (defined == 0) throw ConfigError("macro_map: no class has a defined AP");
  return total / static_cast<double>(defined);
}

double weighted_map(std::span<const std::optional<double>> ap,
                    std::span<const std::size_t> positives) {
  if (ap.size() != positives.size()) {
    throw DimensionError("weighted_map: AP and positive counts differ in length");
  }
  double weighted = 0.0;
  std::size_t total = 0;
  for (std::size_t j = 0; j < ap.size(); ++j) {
    if (ap[j] && positives[j] > 0) {
      weighted += *ap[j] * static_cast<double>(positives[j]);
      total += positives[j];
    }
  }
  if (total == 0) throw ConfigError("weighted_map: no positives in any class");
  return weighted / static_cast<double>(total);
}

double gap(const ScoredPredictions& preds) {
  preds.validate();
  const std::size_t cols = preds.scores.cols();
  std::vector<RankedItem> items(preds.scores.size());
  std::size_t positives = 0;
  for (std::size_t i = 0; i < preds.scores.rows(); ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const bool pos = preds.truth(i, j);
      items[i * cols + j] = {preds.scores(i, j), i * cols + j, pos};
      positives += pos ? 1 : 0;
    }
  }
  if (positives == 0) throw ConfigError("gap: no positives");
  return *area(pr_curve(std::move(items), positives));
}

double gap_at_k(const ScoredPredictions& preds, std::size_t k) {
  preds.validate();
  const std::size_t cols = preds.scores.cols();
  if (k < 1 || k > cols) {
    throw ConfigError("gap_at_k: k=" + std::to_string(k) +
                      " outside [1, " + std::to_string(cols) + "]");
  }
  const std::size_t positives = preds.truth.count();
  if (positives == 0) throw ConfigError("gap_at_k: no positives");

  std::vector<RankedItem> pool;
  pool.reserve(preds.scores.rows() * k);
  std::vector<std::size_t> order(cols);
  for (std::size_t i = 0; i < preds.scores.rows(); ++i) {
    auto row = preds.scores.row(i);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
    for (std::size_t r = 0; r < k; ++r) {
      const std::size_t j = order[r];
      pool.push_back({row[j], i * cols + j, preds.truth(i, j)});
    }
  }
  return *area(pr_curve(std::move(pool), positives));
}

std::vector<double> column(const Matrix& m, std::size_t c) {
  std::vector<double> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) out[r] = m(r, c);
  return out;
}

std::vector<std::uint8_t> column(const BinaryMatrix& m, std::size_t c) {
  std::vector<std::uint8_t> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) out[r] = m(r, c) ? 1 : 0;
  return out;
}

MetricReport evaluate(const ScoredPredictions& preds,
                      std::span<const std::size_t> ks) {
  preds.validate();
  MetricReport report;
  const std::size_t cols = preds.scores.cols();
  for (std::size_t j = 0; j < cols; ++j) {
    const auto s = column(preds.scores, j);
    const auto t = column(preds.truth, j);
    report.ap_per_class.push_back(average_precision(s, t));
    report.positives_per_class.push_back(preds.truth.count_column(j));
  }
  report.macro_map = macro_map(report.ap_per_class);
  report.weighted_map =
      weighted_map(report.ap_per_class, report.positives_per_class);
  report.gap = gap(preds);
  for (std::size_t k : ks) {
    report.gap_at_k[k] = gap_at_k(preds, std::min(k, cols));
  }
  return report;
}

nlohmann::ordered_json report_json(const MetricReport& report,
                                   std::span<const int> class_ids) {
  if (class_ids.size() != report.ap_per_class.size()) {
    throw DimensionError("report_to_json: class id count mismatch");
  }
  nlohmann::ordered_json doc;
  doc["gap"] = report.gap;
  nlohmann::ordered_json at_k = nlohmann::ordered_json::object();
  for (const auto& [k, v] : report.gap_at_k) at_k[std::to_string(k)] = v;
  doc["gap_at_k"] = at_k;
  doc["gap_at_k_recall_denominator"] = "all positives, including truncated";
  doc["macro_map"] = report.macro_map;
  doc["weighted_map"] = report.weighted_map;
  nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
  nlohmann::ordered_json undefined = nlohmann::ordered_json::array();
  for (std::size_t j = 0; j < class_ids.size(); ++j) {
    const std::string key = std::to_string(class_ids[j]);
    if (report.ap_per_class[j]) {
      per_class[key] = *report.ap_per_class[j];
    } else {
      per_class[key] = nullptr;
      undefined.push_back(class_ids[j]);
    }
  }
  doc["ap_per_class"] = per_class;
  doc["undefined_classes"] = undefined;
  return doc;
}

std::string report_to_json(const MetricReport& report,
                           std::span<const int> class_ids) {
  return report_json(report, class_ids).dump(2) + "\n";
}

}  // namespace mlcl::metrics
