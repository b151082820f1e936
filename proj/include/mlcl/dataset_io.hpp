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

// On-disk dataset formats.
//
//   labels       CSV  class_id,name,description,category,parent_id,
//                     prompt_mode,agreement_threshold
//   annotations  JSONL {"image_id", "class_id", "votes_positive",
//                       "votes_total"}
//   features     CSV  image_id,f0,...,f{d-1}
//   ground truth JSONL {"image_id", "positive_class_ids": [...]}
//   splits       JSON {"seed", "ratios", "train", "val", "test"} with image
//                     ids per part
//
// Numbers are written in shortest round-trip form, so write -> read is
// exact. Readers throw ParseError with the 1-based line number.

#ifndef MLCL_DATASET_IO_HPP_
#define MLCL_DATASET_IO_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "mlcl/data.hpp"
#include "mlcl/matrix.hpp"

namespace mlcl::data {

std::string labels_to_csv(const LabelSet& labels);
LabelSet labels_from_csv(const std::string& text,
                         const std::string& source = "labels");

std::string annotations_to_jsonl(const std::vector<AnnotationRecord>& records);
std::vector<AnnotationRecord> annotations_from_jsonl(
    const std::string& text, const std::string& source = "annotations");

struct FeatureTable {
  std::vector<std::string> image_ids;
  Matrix features;
};
std::string features_to_csv(const std::vector<std::string>& image_ids,
                            const Matrix& features);
FeatureTable features_from_csv(const std::string& text,
                               const std::string& source = "features");

std::string ground_truth_to_jsonl(const std::vector<std::string>& image_ids,
                                  const BinaryMatrix& truth,
                                  const LabelSet& labels);
// Rows follow `image_ids`; images missing from the file are all-negative.
// Unknown images or classes are errors.
BinaryMatrix ground_truth_from_jsonl(const std::string& text,
                                     const std::vector<std::string>& image_ids,
                                     const LabelSet& labels,
                                     const std::string& source = "ground_truth");

std::string split_to_json(const SplitAssignment& split,
                          const std::vector<std::string>& image_ids,
                          const SplitSpec& spec);
// Row indices into `image_ids` for each part.
SplitAssignment split_from_json(const std::string& text,
                                const std::vector<std::string>& image_ids);

// Writes labels.csv, features.csv and ground_truth.jsonl into `dir`.
void write_dataset(const std::filesystem::path& dir,
                   const ConsolidatedDataset& dataset);
ConsolidatedDataset read_dataset(const std::filesystem::path& dir);

}  // namespace mlcl::data

#endif  // MLCL_DATASET_IO_HPP_
