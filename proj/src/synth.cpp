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

#include "mlcl/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "mlcl/errors.hpp"
#include "mlcl/random.hpp"

namespace mlcl::data {
namespace {

constexpr std::array<const char*, 30> kFlatNames = {
    "bed",        "beach",      "mountain", "food",     "lobby",
    "golf",       "garden",     "kitchen",  "balcony",  "gym",
    "bar",        "sauna",      "tennis",   "library",  "fireplace",
    "bathtub",    "terrace",    "parking",  "river",    "lake",
    "forest",     "snow",       "sunset",   "playground", "restaurant",
    "museum",     "castle",     "boat",     "bicycle",  "animal"};
constexpr std::array<const char*, 4> kCategories = {"facility", "activity",
                                                    "view", "room"};
constexpr std::array<const char*, 8> kModifiers = {
    "indoor", "outdoor", "heated", "rooftop",
    "infinity", "private", "shared", "kids"};
constexpr const char* kRootName = "swimming pool";

std::size_t hierarchy_size(std::size_t depth) {
  return depth <= 1 ? 0 : 1 + 2 * (depth - 1);
}

// Smallest vote count k out of `total` with k / total >= threshold.
int votes_needed(double threshold, int total) {
  for (int k = 0; k <= total; ++k) {
    if (static_cast<double>(k) / static_cast<double>(total) >= threshold) return k;
  }
  return total + 1;
}

std::vector<LabelDef> make_labels(const SynthConfig& c) {
  std::vector<LabelDef> labels;
  const std::size_t tree = hierarchy_size(c.hierarchy_depth);
  // Tree nodes: index 0 is the root; level k (k >= 1) holds indices
  // 2k - 1 and 2k, both children of the first node of level k - 1.
  for (std::size_t j = 0; j < tree; ++j) {
    LabelDef l;
    l.class_id = static_cast<int>(j);
    if (j == 0) {
      l.name = kRootName;
    } else {
      const std::size_t level = (j + 1) / 2;
      const std::size_t parent = level == 1 ? 0 : 2 * (level - 1) - 1;
      l.parent_id = static_cast<int>(parent);
      l.name = std::string(kModifiers[(j - 1) % kModifiers.size()]) + " " +
               labels[parent].name;
    }
    labels.push_back(std::move(l));
  }
  for (std::size_t j = tree; j < c.n_classes; ++j) {
    LabelDef l;
    l.class_id = static_cast<int>(j);
    const std::size_t k = j - tree;
    l.name = kFlatNames[k % kFlatNames.size()];
    if (k >= kFlatNames.size()) l.name += " " + std::to_string(k / kFlatNames.size());
    labels.push_back(std::move(l));
  }
  for (std::size_t j = 0; j < labels.size(); ++j) {
    LabelDef& l = labels[j];
    l.category = kCategories[j % kCategories.size()];
    l.description = l.name + ", a " + l.category + " shown in the photo";
    l.agreement_threshold = j % 5 == 4 ? 0.8 : kDefaultAgreementThreshold;
  }
  return labels;
}

}  // namespace

void SynthConfig::validate() const {
  if (n == 0) throw ConfigError("synth: n must be >= 1");
  if (n_classes == 0) throw ConfigError("synth: n_classes must be >= 1");
  if (d_in == 0) throw ConfigError("synth: d_in must be >= 1");
  if (hierarchy_depth == 0) throw ConfigError("synth: hierarchy_depth must be >= 1");
  if (hierarchy_size(hierarchy_depth) > n_classes) {
    throw ConfigError("synth: hierarchy of depth " +
                      std::to_string(hierarchy_depth) + " needs " +
                      std::to_string(hierarchy_size(hierarchy_depth)) +
                      " classes");
  }
  if (!label_frequencies.empty() && label_frequencies.size() != n_classes) {
    throw ConfigError("synth: label_frequencies must have n_classes entries");
  }
  for (double f : label_frequencies) {
    if (!(f > 0.0 && f < 1.0)) throw ConfigError("synth: frequencies must lie in (0, 1)");
  }
  if (label_frequencies.empty() &&
      !(freq_min > 0.0 && freq_max < 1.0 && freq_min <= freq_max)) {
    throw ConfigError("synth: need 0 < freq_min <= freq_max < 1");
  }
  if (!(signal > 0.0) || !(noise_std >= 0.0)) {
    throw ConfigError("synth: signal must be > 0 and noise_std >= 0");
  }
  if (!(confusion >= 0.0 && confusion < 1.0)) {
    throw ConfigError("synth: confusion must lie in [0, 1)");
  }
  if (!(flip_noise_rate >= 0.0 && flip_noise_rate <= 1.0)) {
    throw ConfigError("synth: flip_noise_rate must lie in [0, 1]");
  }
  if (compositional_holdout &&
      n_classes < hierarchy_size(hierarchy_depth) + 2) {
    throw ConfigError("synth: compositional holdout needs two flat classes");
  }
  split.validate();
}

SynthDataset synth_generate(const SynthConfig& c) {
  c.validate();
  Rng rng(c.seed);
  const std::size_t L = c.n_classes;

  LabelSet labels(make_labels(c));
  std::vector<double> freq = c.label_frequencies;
  if (freq.empty()) {
    for (std::size_t j = 0; j < L; ++j) {
      const double t = L == 1 ? 0.0 : static_cast<double>(j) / static_cast<double>(L - 1);
      freq.push_back(c.freq_max + t * (c.freq_min - c.freq_max));
    }
  }

  // Unit directions first; a confusable class mixes its partner's
  // direction with the component of a fresh draw orthogonal to it.
  const std::size_t tree = hierarchy_size(c.hierarchy_depth);
  std::vector<Matrix> prototypes;
  for (std::size_t j = 0; j < L; ++j) {
    Matrix p(1, c.d_in);
    for (double& v : p.data()) v = rng.normal();
    std::optional<std::size_t> partner;
    if (j < tree) {
      if (auto parent = labels.parent_column(j)) partner = *parent;
    } else if ((j - tree) % 2 == 1) {
      partner = j - 1;
    }
    // With d_in == 1 there is no orthogonal direction; keep the draw as is.
    if (c.d_in < 2) partner.reset();
    if (partner && c.confusion > 0.0) {
      const Matrix& q = prototypes[*partner];
      double dot = 0.0;
      for (std::size_t d = 0; d < c.d_in; ++d) dot += p[d] * q[d];
      for (std::size_t d = 0; d < c.d_in; ++d) p[d] -= dot * q[d];
    }
    double norm2 = 0.0;
    for (double v : p.data()) norm2 += v * v;
    p *= 1.0 / std::sqrt(norm2);
    if (partner && c.confusion > 0.0) {
      const Matrix& q = prototypes[*partner];
      const double r = c.confusion;
      for (std::size_t d = 0; d < c.d_in; ++d) {
        p[d] = r * q[d] + std::sqrt(1.0 - r * r) * p[d];
      }
    }
    prototypes.push_back(std::move(p));
  }
  for (Matrix& p : prototypes) p *= c.signal;

  BinaryMatrix raw(c.n, L);
  for (std::size_t i = 0; i < c.n; ++i) {
    for (std::size_t j = 0; j < L; ++j) raw.set(i, j, rng.bernoulli(freq[j]));
  }
  const BinaryMatrix clean = propagate_hierarchy(raw, labels);

  Matrix features(c.n, c.d_in);
  for (std::size_t i = 0; i < c.n; ++i) {
    auto row = features.row(i);
    for (std::size_t j = 0; j < L; ++j) {
      if (!clean(i, j)) continue;
      for (std::size_t d = 0; d < c.d_in; ++d) row[d] += prototypes[j][d];
    }
    for (double& v : row) v += c.noise_std * rng.normal();
  }

  SynthDataset out;
  out.split = stratified_split(clean, c.split);

  // Labels the annotators "voted": pre-closure draws for clean rows,
  // flipped labels for training rows.
  BinaryMatrix voted = raw;
  BinaryMatrix flipped = clean;
  Rng noise_rng(c.seed ^ 0x9e3779b97f4a7c15ULL);
  for (std::size_t i : out.split.train) {
    for (std::size_t j = 0; j < L; ++j) {
      if (noise_rng.bernoulli(c.flip_noise_rate)) flipped.set(i, j, !clean(i, j));
    }
    for (std::size_t j = 0; j < L; ++j) voted.set(i, j, flipped(i, j));
  }
  const BinaryMatrix observed = propagate_hierarchy(voted, labels);

  std::vector<std::string> ids(c.n);
  for (std::size_t i = 0; i < c.n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "img%06zu", i);
    ids[i] = buf;
  }

  Rng vote_rng(c.seed ^ 0x5bd1e9955bd1e995ULL);
  for (std::size_t i = 0; i < c.n; ++i) {
    for (std::size_t j = 0; j < L; ++j) {
      const int need = votes_needed(labels[j].agreement_threshold,
                                    kDefaultVotesTotal);
      int votes = 0;
      if (voted(i, j)) {
        votes = need + static_cast<int>(vote_rng.below(
                           static_cast<std::size_t>(kDefaultVotesTotal - need + 1)));
      } else if (need > 0) {
        votes = static_cast<int>(vote_rng.below(static_cast<std::size_t>(need)));
      }
      if (votes > 0) {
        out.records.push_back({ids[i], labels[j].class_id, votes,
                               kDefaultVotesTotal});
      }
    }
  }

  if (c.compositional_holdout) {
    const std::size_t first_flat = hierarchy_size(c.hierarchy_depth);
    std::vector<std::size_t> flat;
    for (std::size_t j = first_flat; j < L; ++j) flat.push_back(j);
    std::stable_sort(flat.begin(), flat.end(), [&](std::size_t a, std::size_t b) {
      return freq[a] > freq[b];
    });
    CompositionalHoldout h;
    h.first_column = std::min(flat[0], flat[1]);
    h.second_column = std::max(flat[0], flat[1]);
    h.prompt = "a photo with " + labels[h.first_column].name + " and " +
               labels[h.second_column].name;
    h.truth.resize(c.n);
    for (std::size_t i = 0; i < c.n; ++i) {
      h.truth[i] = clean(i, h.first_column) && clean(i, h.second_column) ? 1 : 0;
    }
    out.holdout = std::move(h);
  }

  out.dataset.image_ids = std::move(ids);
  out.dataset.features = std::move(features);
  out.dataset.truth = observed;
  out.dataset.labels = std::move(labels);
  out.clean_truth = clean;
  return out;
}

}  // namespace mlcl::data
