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

// Ranking metrics for multi-label predictions.
//
// Every metric here is the plain step sum  sum_i p(i) * dr(i)  over a list
// ranked by descending score, where dr(i) = 1/NP at a positive and 0
// elsewhere. No interpolation is applied. Ties are broken by the original
// position (sample index, then class index), so results are reproducible
// bit for bit.

#ifndef MLCL_METRICS_HPP_
#define MLCL_METRICS_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlcl/matrix.hpp"

namespace mlcl::metrics {

struct ScoredPredictions {
  Matrix scores;       // P_ij, N x L
  BinaryMatrix truth;  // N x L

  // Throws DimensionError on shape mismatch, NumericError on non-finite
  // scores.
  void validate() const;
};

struct PRPoint {
  double precision = 0.0;
  double recall = 0.0;
  bool positive = false;
};

// Precision/recall after each rank of a ranked prediction list.
struct PRCurve {
  std::vector<PRPoint> points;
  std::size_t positives_total = 0;
};

// One entry of a ranked list. `order` breaks score ties (smaller first).
struct RankedItem {
  double score = 0.0;
  std::size_t order = 0;
  bool positive = false;
};

// Sorts by (-score, order) and accumulates the curve. `positives_total` may
// exceed the positives present in `items` (truncated lists).
PRCurve pr_curve(std::vector<RankedItem> items, std::size_t positives_total);

// Area sum_i p(i) dr(i); nullopt when positives_total == 0.
std::optional<double> area(const PRCurve& curve);

// Per-class AP. nullopt when the class has no positives.
std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const std::uint8_t> truth);

// Mean over defined entries. Throws ConfigError if none are defined.
double macro_map(std::span<const std::optional<double>> ap);

// sum AP_j NP_j / sum NP_j over defined entries. Throws ConfigError when no
// class has positives.
double weighted_map(std::span<const std::optional<double>> ap,
                    std::span<const std::size_t> positives);

// Global AP over all N*L (score, truth) pairs. Throws ConfigError when the
// truth matrix has no positives.
double gap(const ScoredPredictions& preds);

// GAP over the pool of each sample's top-k scores. Positives outside a
// sample's top k still count in the recall denominator. Throws ConfigError
// unless 1 <= k <= L.
double gap_at_k(const ScoredPredictions& preds, std::size_t k);

struct MetricReport {
  std::vector<std::optional<double>> ap_per_class;
  std::vector<std::size_t> positives_per_class;
  double macro_map = 0.0;
  double weighted_map = 0.0;
  double gap = 0.0;
  // Requested K -> GAP@min(K, L).
  std::map<std::size_t, double> gap_at_k;
};

std::vector<double> column(const Matrix& m, std::size_t c);
std::vector<std::uint8_t> column(const BinaryMatrix& m, std::size_t c);

MetricReport evaluate(const ScoredPredictions& preds,
                      std::span<const std::size_t> ks = {});

// JSON document with per-class AP keyed by class id (null when undefined).
std::string report_to_json(const MetricReport& report,
                           std::span<const int> class_ids);

}  // namespace mlcl::metrics

#endif  // MLCL_METRICS_HPP_
