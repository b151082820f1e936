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


// Scoring with a trained dual encoder: probabilities, zero-shot prompts, the
// pair-prompt baseline, per-class storage thresholds and embedding export.

#ifndef MLCL_INFERENCE_HPP_
#define MLCL_INFERENCE_HPP_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlcl/matrix.hpp"
#include "mlcl/model.hpp"

namespace mlcl::infer {

// P_ij = sigmoid(raw_ij * exp(logit_scale)). Rows are scored independently,
// so a batch gives the same bits as one call per image. Probabilities
// saturate to exactly 0 or 1 in double precision for |logit| > ~37.
Matrix predict(const model::DualEncoderModel& model, const Matrix& features,
               std::span<const model::TokenizedText> texts);

// Same pipeline with free-form prompts. Out-of-vocabulary words are
// skipped; a prompt with no known word is a ConfigError naming it.
Matrix zero_shot(const model::DualEncoderModel& model,
                 const model::Vocabulary& vocab, const Matrix& features,
                 std::span<const std::string> prompts);

// Per class: softmax over the scaled logits of ("a photo",
// "a photo of {name}") and keep the second probability.
Matrix clip_pair_baseline(const model::DualEncoderModel& model,
                          const model::Vocabulary& vocab,
                          const Matrix& features,
                          std::span<const std::string> class_names);

// softmax([a, b])[1], computed as sigmoid(b - a).
double pair_softmax_second(double a, double b);

struct ClassThreshold {
  std::optional<double> threshold;  // unset when the class has no positives
  std::size_t positives = 0;
  double recall = 0.0;
  double drop_fraction = 0.0;  // share of the class's predictions dropped
};

struct ThresholdTable {
  std::vector<ClassThreshold> per_class;
  // Over all n*L predictions; classes without a threshold keep everything.
  // Recall is vacuously 1 when there are no positives.
  double recall = 0.0;
  double drop_fraction = 0.0;
};

// A prediction is kept iff score >= threshold. Per class the threshold is
// the highest value keeping at least ceil(target * positives) positives,
// i.e. that positive's score.
ThresholdTable select_thresholds(const Matrix& scores, const BinaryMatrix& truth,
                                 std::span<const double> target_recall);
ThresholdTable select_thresholds(const Matrix& scores, const BinaryMatrix& truth,
                                 double target_recall);

// Re-measures recall and drop fraction of fixed thresholds on other data.
ThresholdTable apply_thresholds(const ThresholdTable& table, const Matrix& scores,
                                const BinaryMatrix& truth);

std::string thresholds_to_csv(const ThresholdTable& table,
                              std::span<const int> class_ids);
// Only thresholds are read back; recall and drop fraction are informational.
ThresholdTable thresholds_from_csv(const std::string& text,
                                   std::span<const int> class_ids,
                                   const std::string& source = "thresholds");

// One JSON object per image: {"image_id", "scores": {"<class_id>": p}}.
// With a table, entries below their class threshold are omitted.
std::string predictions_to_jsonl(const std::vector<std::string>& image_ids,
                                 const Matrix& scores,
                                 std::span<const int> class_ids,
                                 const ThresholdTable* table = nullptr);

// image_id,e0..e{d_e-1}; rows are unit norm.
std::string embeddings_to_csv(const std::vector<std::string>& image_ids,
                              const Matrix& embeddings);
void export_embeddings(const std::filesystem::path& path,
                       const model::DualEncoderModel& model,
                       const std::vector<std::string>& image_ids,
                       const Matrix& features);

// Histogram of scaled logits split by truth, over [-exp(s), exp(s)].
// CSV bin_lo,bin_hi,positives,negatives.
std::string logit_histogram_csv(const Matrix& scaled_logits,
                                const BinaryMatrix& truth, double logit_scale,
                                std::size_t bins = 20);

}  // namespace mlcl::infer

#endif  // MLCL_INFERENCE_HPP_
