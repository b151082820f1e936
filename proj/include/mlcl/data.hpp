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

// Label definitions, annotation consolidation, hierarchy closure and
// stratified splitting.

#ifndef MLCL_DATA_HPP_
#define MLCL_DATA_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlcl/matrix.hpp"

namespace mlcl::data {

inline constexpr double kDefaultAgreementThreshold = 0.6;
inline constexpr int kDefaultVotesTotal = 5;

enum class PromptMode { kName, kDescription };

std::string to_string(PromptMode mode);
// Accepts "name" / "description"; throws ConfigError otherwise.
PromptMode prompt_mode_from_string(const std::string& s);

struct LabelDef {
  int class_id = 0;
  std::string name;
  std::string description;
  std::string category;
  std::optional<int> parent_id;
  PromptMode prompt_mode = PromptMode::kName;
  double agreement_threshold = kDefaultAgreementThreshold;

  friend bool operator==(const LabelDef&, const LabelDef&) = default;
};

// "a photo with {name}" or "a photo with {description}".
// Throws ConfigError on an empty name, or an empty description in
// description mode.
std::string build_label_text(const LabelDef& label);

// Ordered set of labels; column j of every label matrix is labels()[j].
// Construction validates ids, thresholds, parent links and rejects cycles.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<LabelDef> labels);

  std::size_t size() const { return labels_.size(); }
  const LabelDef& operator[](std::size_t column) const {
    return labels_[column];
  }
  const std::vector<LabelDef>& labels() const { return labels_; }
  std::vector<int> class_ids() const;

  // Throws IndexError for an unknown id.
  std::size_t column_of(int class_id) const;
  std::optional<std::size_t> find_column(int class_id) const;
  std::optional<std::size_t> parent_column(std::size_t column) const {
    return parent_[column];
  }
  // Ancestor columns from the direct parent upwards.
  std::vector<std::size_t> ancestors(std::size_t column) const;

  std::vector<std::string> label_texts() const;

  friend bool operator==(const LabelSet& a, const LabelSet& b) {
    return a.labels_ == b.labels_;
  }

 private:
  std::vector<LabelDef> labels_;
  std::vector<std::optional<std::size_t>> parent_;
  std::map<int, std::size_t> column_;
};

struct AnnotationRecord {
  std::string image_id;
  int class_id = 0;
  int votes_positive = 0;
  int votes_total = kDefaultVotesTotal;

  friend bool operator==(const AnnotationRecord&,
                         const AnnotationRecord&) = default;
};

// Binary labels for `image_ids` x labels: positive iff
// votes_positive / votes_total >= the class agreement threshold. Pairs
// without a record are negative. Throws ConfigError on an unknown class or
// image, invalid vote counts, or a duplicated (image, class) pair.
BinaryMatrix consolidate(std::span<const AnnotationRecord> records,
                         const LabelSet& labels,
                         std::span<const std::string> image_ids);

// Marks every ancestor of a positive class positive. Idempotent; never
// removes positives.
BinaryMatrix propagate_hierarchy(const BinaryMatrix& truth,
                                 const LabelSet& labels);
bool is_hierarchy_closed(const BinaryMatrix& truth, const LabelSet& labels);

struct ConsolidatedDataset {
  std::vector<std::string> image_ids;
  Matrix features;     // n x d_in
  BinaryMatrix truth;  // n x L
  LabelSet labels;

  std::size_t size() const { return image_ids.size(); }
  // Throws on inconsistent shapes or a truth matrix that is not closed
  // under the hierarchy.
  void validate() const;
  ConsolidatedDataset subset(std::span<const std::size_t> rows) const;
};

struct SplitSpec {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
  std::uint64_t seed = 0;

  // Ratios positive and summing to 1 (within 1e-9).
  void validate() const;
};

struct SplitAssignment {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  // Per image: its lowest-frequency positive column, or nullopt when it has
  // no positives.
  std::vector<std::optional<std::size_t>> stratum;
};

// Stratum of each image: the positive class with the lowest global
// frequency (ties to the lower column). Images without positives share one
// stratum. Each stratum is shuffled with the spec seed and cut into
// largest-remainder proportional parts. Index lists come back sorted.
SplitAssignment stratified_split(const BinaryMatrix& truth,
                                 const SplitSpec& spec);

}  // namespace mlcl::data

#endif  // MLCL_DATA_HPP_
