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

// Synthetic multi-label image-feature datasets.
//
// Each class owns a random prototype vector of norm `signal`. An image's
// features are the sum of the prototypes of its positive classes plus
// isotropic Gaussian noise with standard deviation `noise_std` per
// coordinate. Labels are drawn per class with the configured frequency and
// then closed under the hierarchy.
//
// Label noise is applied after splitting: every (training image, class)
// pair is flipped with probability flip_noise_rate and the result is closed
// again. Validation and test rows keep their clean labels.

#ifndef MLCL_SYNTH_HPP_
#define MLCL_SYNTH_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mlcl/data.hpp"

namespace mlcl::data {

struct SynthConfig {
  std::size_t n = 2000;
  std::size_t n_classes = 12;
  std::size_t d_in = 32;
  // 1 = flat labels; h >= 2 adds one tree of h levels (root plus two
  // children per level, expanding the first child).
  std::size_t hierarchy_depth = 2;
  // Per-class frequencies; empty spreads them evenly over
  // [freq_min, freq_max].
  std::vector<double> label_frequencies;
  double freq_min = 0.08;
  double freq_max = 0.3;
  double signal = 1.0;
  double noise_std = 0.15;
  // Cosine between the prototypes of confusable classes: each hierarchy
  // child against its parent, and flat classes in consecutive pairs
  // (second against first). 0 gives independent prototypes.
  double confusion = 0.0;
  double flip_noise_rate = 0.1;
  SplitSpec split;
  // Adds an unseen class "A and B" (positive iff both A and B are) used
  // for zero-shot evaluation. Needs two classes outside the hierarchy.
  bool compositional_holdout = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct CompositionalHoldout {
  std::size_t first_column = 0;
  std::size_t second_column = 0;
  std::string prompt;
  std::vector<std::uint8_t> truth;  // per image, clean
};

struct SynthDataset {
  // Truth is the observed (noised on training rows) label matrix.
  ConsolidatedDataset dataset;
  BinaryMatrix clean_truth;
  SplitAssignment split;
  // Vote records that consolidate (then close) to dataset.truth.
  std::vector<AnnotationRecord> records;
  std::optional<CompositionalHoldout> holdout;
};

// Deterministic for a fixed config (including seed).
SynthDataset synth_generate(const SynthConfig& config);

}  // namespace mlcl::data

#endif  // MLCL_SYNTH_HPP_
