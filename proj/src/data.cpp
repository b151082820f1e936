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

#include "mlcl/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <unordered_map>

#include "mlcl/errors.hpp"
#include "mlcl/random.hpp"

namespace mlcl::data {

std::string to_string(PromptMode mode) {
  return mode == PromptMode::kName ? "name" : "description";
}

PromptMode prompt_mode_from_string(const std::string& s) {
  if (s == "name") return PromptMode::kName;
  if (s == "description") return PromptMode::kDescription;
  throw ConfigError("unknown prompt mode '" + s + "'");
}

std::string build_label_text(const LabelDef& label) {
  if (label.name.empty()) {
    throw ConfigError("class " + std::to_string(label.class_id) +
                      " has an empty name");
  }
  if (label.prompt_mode == PromptMode::kName) return "a photo with " + label.name;
  if (label.description.empty()) {
    throw ConfigError("class " + std::to_string(label.class_id) +
                      " uses description mode but has no description");
  }
  return "a photo with " + label.description;
}

LabelSet::LabelSet(std::vector<LabelDef> labels) : labels_(std::move(labels)) {
  for (std::size_t j = 0; j < labels_.size(); ++j) {
    const LabelDef& l = labels_[j];
    if (l.name.empty()) {
      throw ConfigError("class " + std::to_string(l.class_id) +
                        " has an empty name");
    }
    if (!(l.agreement_threshold >= 0.0 && l.agreement_threshold <= 1.0)) {
      throw ConfigError("class " + std::to_string(l.class_id) +
                        ": agreement threshold outside [0, 1]");
    }
    if (!column_.emplace(l.class_id, j).second) {
      throw ConfigError("duplicate class id " + std::to_string(l.class_id));
    }
  }
  parent_.resize(labels_.size());
  for (std::size_t j = 0; j < labels_.size(); ++j) {
    if (!labels_[j].parent_id) continue;
    auto it = column_.find(*labels_[j].parent_id);
    if (it == column_.end()) {
      throw ConfigError("class " + std::to_string(labels_[j].class_id) +
                        " has unknown parent " +
                        std::to_string(*labels_[j].parent_id));
    }
    parent_[j] = it->second;
  }
  // A walk longer than the number of classes must have revisited a node.
  for (std::size_t j = 0; j < labels_.size(); ++j) {
    std::size_t steps = 0;
    for (auto p = parent_[j]; p; p = parent_[*p]) {
      if (++steps > labels_.size()) {
        throw ConfigError("label hierarchy has a cycle through class " +
                          std::to_string(labels_[j].class_id));
      }
    }
  }
}

std::vector<int> LabelSet::class_ids() const {
  std::vector<int> ids;
  ids.reserve(labels_.size());
  for (const auto& l : labels_) ids.push_back(l.class_id);
  return ids;
}

std::optional<std::size_t> LabelSet::find_column(int class_id) const {
  auto it = column_.find(class_id);
  if (it == column_.end()) return std::nullopt;
  return it->second;
}

std::size_t LabelSet::column_of(int class_id) const {
  if (auto c = find_column(class_id)) return *c;
  throw IndexError("unknown class id " + std::to_string(class_id));
}

std::vector<std::size_t> LabelSet::ancestors(std::size_t column) const {
  std::vector<std::size_t> out;
  for (auto p = parent_[column]; p; p = parent_[*p]) out.push_back(*p);
  return out;
}

std::vector<std::string> LabelSet::label_texts() const {
  std::vector<std::string> out;
  out.reserve(labels_.size());
  for (const auto& l : labels_) out.push_back(build_label_text(l));
  return out;
}

BinaryMatrix consolidate(std::span<const AnnotationRecord> records,
                         const LabelSet& labels,
                         std::span<const std::string> image_ids) {
  std::unordered_map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < image_ids.size(); ++i) {
    if (!row_of.emplace(image_ids[i], i).second) {
      throw ConfigError("duplicate image id '" + image_ids[i] + "'");
    }
  }
  BinaryMatrix out(image_ids.size(), labels.size());
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& r : records) {
    const auto col = labels.find_column(r.class_id);
    if (!col) {
      throw ConfigError("annotation for unknown class " +
                        std::to_string(r.class_id));
    }
    auto row = row_of.find(r.image_id);
    if (row == row_of.end()) {
      throw ConfigError("annotation for unknown image '" + r.image_id + "'");
    }
    if (r.votes_total < 1 || r.votes_positive < 0 ||
        r.votes_positive > r.votes_total) {
      throw ConfigError("invalid votes " + std::to_string(r.votes_positive) +
                        "/" + std::to_string(r.votes_total) + " for image '" +
                        r.image_id + "'");
    }
    if (!seen.emplace(row->second, *col).second) {
      throw ConfigError("duplicate annotation for image '" + r.image_id +
                        "', class " + std::to_string(r.class_id));
    }
    // The division rounds k/n the same way a decimal literal threshold is
    // rounded, so 3/5 >= 0.6 holds exactly.
    const double rate = static_cast<double>(r.votes_positive) /
                        static_cast<double>(r.votes_total);
    out.set(row->second, *col, rate >= labels[*col].agreement_threshold);
  }
  return out;
}

BinaryMatrix propagate_hierarchy(const BinaryMatrix& truth,
                                 const LabelSet& labels) {
  if (truth.cols() != labels.size()) {
    throw DimensionError("propagate_hierarchy: truth has " +
                         std::to_string(truth.cols()) + " columns for " +
                         std::to_string(labels.size()) + " labels");
  }
  BinaryMatrix out = truth;
  for (std::size_t i = 0; i < truth.rows(); ++i) {
    for (std::size_t j = 0; j < truth.cols(); ++j) {
      if (!truth(i, j)) continue;
      for (std::size_t a : labels.ancestors(j)) out.set(i, a, true);
    }
  }
  return out;
}

bool is_hierarchy_closed(const BinaryMatrix& truth, const LabelSet& labels) {
  for (std::size_t i = 0; i < truth.rows(); ++i) {
    for (std::size_t j = 0; j < truth.cols(); ++j) {
      const auto p = labels.parent_column(j);
      if (truth(i, j) && p && !truth(i, *p)) return false;
    }
  }
  return true;
}

void ConsolidatedDataset::validate() const {
  const std::size_t n = image_ids.size();
  if (features.rows() != n || truth.rows() != n) {
    throw DimensionError("dataset: " + std::to_string(n) + " ids, " +
                         std::to_string(features.rows()) + " feature rows, " +
                         std::to_string(truth.rows()) + " truth rows");
  }
  if (truth.cols() != labels.size()) {
    throw DimensionError("dataset: truth columns do not match labels");
  }
  if (!is_hierarchy_closed(truth, labels)) {
    throw ConfigError("dataset: truth is not closed under the hierarchy");
  }
}

ConsolidatedDataset ConsolidatedDataset::subset(
    std::span<const std::size_t> rows) const {
  ConsolidatedDataset out;
  out.labels = labels;
  out.features = features.select_rows(rows);
  out.truth = truth.select_rows(rows);
  for (std::size_t r : rows) out.image_ids.push_back(image_ids[r]);
  return out;
}

void SplitSpec::validate() const {
  if (!(train > 0.0 && val > 0.0 && test > 0.0)) {
    throw ConfigError("split ratios must be positive");
  }
  if (std::abs(train + val + test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must sum to 1");
  }
}

SplitAssignment stratified_split(const BinaryMatrix& truth,
                                 const SplitSpec& spec) {
  spec.validate();
  const std::size_t n = truth.rows();
  const std::size_t cols = truth.cols();
  std::vector<std::size_t> freq(cols);
  for (std::size_t j = 0; j < cols; ++j) freq[j] = truth.count_column(j);

  SplitAssignment out;
  out.stratum.resize(n);
  // Key cols is the "no positives" stratum.
  std::map<std::size_t, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < n; ++i) {
    std::optional<std::size_t> best;
    for (std::size_t j = 0; j < cols; ++j) {
      if (truth(i, j) && (!best || freq[j] < freq[*best])) best = j;
    }
    out.stratum[i] = best;
    strata[best.value_or(cols)].push_back(i);
  }

  Rng rng(spec.seed);
  const std::array<double, 3> ratios = {spec.train, spec.val, spec.test};
  for (auto& [key, members] : strata) {
    rng.shuffle(std::span<std::size_t>(members));
    const double m = static_cast<double>(members.size());
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> remainder{};
    std::size_t assigned = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      const double exact = ratios[s] * m;
      counts[s] = static_cast<std::size_t>(std::floor(exact + 1e-9));
      remainder[s] = exact - static_cast<double>(counts[s]);
      assigned += counts[s];
    }
    // Largest remainder; ties go to the earlier part.
    while (assigned < members.size()) {
      std::size_t pick = 0;
      for (std::size_t s = 1; s < 3; ++s) {
        if (remainder[s] > remainder[pick] + 1e-12) pick = s;
      }
      ++counts[pick];
      remainder[pick] = -1.0;
      ++assigned;
    }
    std::size_t pos = 0;
    for (std::size_t k = 0; k < counts[0]; ++k) out.train.push_back(members[pos++]);
    for (std::size_t k = 0; k < counts[1]; ++k) out.val.push_back(members[pos++]);
    for (std::size_t k = 0; k < counts[2]; ++k) out.test.push_back(members[pos++]);
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

}  // namespace mlcl::data
