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

#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "mlcl/data.hpp"
#include "mlcl/dataset_io.hpp"
#include "mlcl/errors.hpp"
#include "mlcl/synth.hpp"
#include "mlcl/trainer.hpp"
#include "test_support.hpp"

namespace mlcl::data {
namespace {

LabelDef label(int id, std::string name, std::optional<int> parent = std::nullopt,
               double threshold = kDefaultAgreementThreshold) {
  LabelDef l;
  l.class_id = id;
  l.name = std::move(name);
  l.parent_id = parent;
  l.agreement_threshold = threshold;
  return l;
}

TEST(LabelText, Examples) {
  EXPECT_EQ(build_label_text(label(1, "Bed")), "a photo with Bed");
  LabelDef d = label(2, "Historical structure");
  d.prompt_mode = PromptMode::kDescription;
  d.description = "historical structure, a building or structure with historical value";
  EXPECT_EQ(build_label_text(d),
            "a photo with historical structure, a building or structure with historical value");
  d.description.clear();
  EXPECT_THROW(build_label_text(d), ConfigError);
}

TEST(LabelSet, Validation) {
  EXPECT_THROW(LabelSet({label(1, "a"), label(1, "b")}), ConfigError);
  EXPECT_THROW(LabelSet({label(1, "a", 9)}), ConfigError);
  EXPECT_THROW(LabelSet({label(1, "a", 2), label(2, "b", 1)}), ConfigError);
  EXPECT_THROW(LabelSet({label(1, "a", std::nullopt, 1.5)}), ConfigError);
  const LabelSet ok({label(5, "child", 3), label(3, "parent")});
  EXPECT_EQ(ok.column_of(3), 1u);
  EXPECT_THROW(ok.column_of(4), IndexError);
  EXPECT_EQ(ok.ancestors(0), (std::vector<std::size_t>{1}));
}

TEST(Consolidate, PaperThresholds) {
  const LabelSet labels({label(1, "Lenient"), label(2, "Strict", std::nullopt, 0.8)});
  const std::vector<std::string> ids = {"x", "y"};
  const std::vector<AnnotationRecord> records = {
      {"x", 1, 3, 5}, {"y", 1, 2, 5}, {"x", 2, 3, 5}, {"y", 2, 4, 5}};
  const auto t = consolidate(records, labels, ids);
  EXPECT_TRUE(t(0, 0));   // 0.6 >= 0.6
  EXPECT_FALSE(t(1, 0));  // 0.4 < 0.6
  EXPECT_FALSE(t(0, 1));  // 0.6 < 0.8
  EXPECT_TRUE(t(1, 1));   // 0.8 >= 0.8
}

TEST(Consolidate, MissingRecordsAreNegative) {
  const LabelSet labels({label(1, "a"), label(2, "b")});
  const std::vector<std::string> ids = {"x", "y"};
  const std::vector<AnnotationRecord> records = {{"y", 2, 5, 5}};
  const auto t = consolidate(records, labels, ids);
  EXPECT_EQ(t.count(), 1u);
  EXPECT_TRUE(t(1, 1));
}

TEST(Consolidate, RejectsBadRecords) {
  const LabelSet labels({label(1, "a")});
  const std::vector<std::string> ids = {"x"};
  auto run = [&](std::vector<AnnotationRecord> r) { return consolidate(r, labels, ids); };
  EXPECT_THROW(run({{"x", 9, 1, 5}}), ConfigError);
  EXPECT_THROW(run({{"z", 1, 1, 5}}), ConfigError);
  EXPECT_THROW(run({{"x", 1, 6, 5}}), ConfigError);
  EXPECT_THROW(run({{"x", 1, 1, 0}}), ConfigError);
  EXPECT_THROW(run({{"x", 1, 1, 5}, {"x", 1, 2, 5}}), ConfigError);
}

TEST(Consolidate, MonotoneInVotes) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    std::vector<LabelDef> defs;
    for (int j = 0; j < 4; ++j) defs.push_back(label(j, "c", std::nullopt, rng.uniform()));
    const LabelSet labels(defs);
    std::vector<std::string> ids;
    std::vector<AnnotationRecord> records;
    for (int i = 0; i < 5; ++i) {
      ids.push_back("img" + std::to_string(i));
      for (int j = 0; j < 4; ++j) {
        const int total = 1 + static_cast<int>(rng.below(7));
        records.push_back({ids.back(), j, static_cast<int>(rng.below(total + 1)), total});
      }
    }
    const auto before = consolidate(records, labels, ids);
    auto more = records;
    for (auto& r : more) {
      if (r.votes_positive < r.votes_total && rng.bernoulli(0.5)) ++r.votes_positive;
    }
    const auto after = consolidate(more, labels, ids);
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t j = 0; j < 4; ++j) {
        if (before(i, j)) {
          EXPECT_TRUE(after(i, j));
        }
      }
    }
  }
}

TEST(PropagateHierarchy, Examples) {
  const LabelSet labels({label(1, "Swimming pool"), label(2, "Indoor swimming pool", 1),
                         label(3, "Outdoor swimming pool", 1)});
  BinaryMatrix t(1, 3);
  t.set(0, 1, true);
  const auto closed = propagate_hierarchy(t, labels);
  EXPECT_TRUE(closed(0, 0));
  EXPECT_TRUE(closed(0, 1));
  EXPECT_FALSE(closed(0, 2));
  EXPECT_EQ(propagate_hierarchy(closed, labels), closed);
  EXPECT_FALSE(is_hierarchy_closed(t, labels));
  EXPECT_TRUE(is_hierarchy_closed(closed, labels));
}

TEST(PropagateHierarchy, Chain) {
  const LabelSet labels({label(3, "c", 2), label(2, "b", 1), label(1, "a")});
  BinaryMatrix t(1, 3);
  t.set(0, 0, true);
  const auto closed = propagate_hierarchy(t, labels);
  EXPECT_EQ(closed.count(), 3u);
}

TEST(PropagateHierarchy, OnlyAddsPositives) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    std::vector<LabelDef> defs;
    for (int j = 0; j < 8; ++j) {
      defs.push_back(label(j, "c", j > 0 && rng.bernoulli(0.6)
                                       ? std::optional<int>(static_cast<int>(rng.below(j)))
                                       : std::nullopt));
    }
    const LabelSet labels(defs);
    const auto t = testing::random_binary(rng, 6, 8, 0.2);
    const auto closed = propagate_hierarchy(t, labels);
    for (std::size_t i = 0; i < 6; ++i) {
      for (std::size_t j = 0; j < 8; ++j) {
        if (t(i, j)) {
          EXPECT_TRUE(closed(i, j));
        }
      }
    }
  }
}

TEST(StratifiedSplit, SingleStratumOfTen) {
  BinaryMatrix t(10, 1);
  for (std::size_t i = 0; i < 10; ++i) t.set(i, 0, true);
  const auto s = stratified_split(t, SplitSpec{});
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.val.size(), 1u);
  EXPECT_EQ(s.test.size(), 1u);
}

TEST(StratifiedSplit, RarestLabelWithTiesToLowerColumn) {
  // Columns 0 and 1 are equally frequent; column 2 is commonest.
  BinaryMatrix t(4, 3);
  t.set(0, 0, true);
  t.set(0, 1, true);
  t.set(0, 2, true);
  t.set(1, 1, true);
  t.set(1, 2, true);
  t.set(2, 0, true);
  t.set(2, 2, true);
  const auto s = stratified_split(t, SplitSpec{});
  EXPECT_EQ(s.stratum[0], 0u);
  EXPECT_EQ(s.stratum[1], 1u);
  EXPECT_EQ(s.stratum[2], 0u);
  EXPECT_EQ(s.stratum[3], std::nullopt);
}

TEST(StratifiedSplit, ProportionalCountsOnThousandImages) {
  SynthConfig c;
  c.n = 1000;
  const auto synth = synth_generate(c);
  const auto s = stratified_split(synth.clean_truth, SplitSpec{});
  std::map<long, std::array<double, 3>> counts;
  auto add = [&](const std::vector<std::size_t>& part, int p) {
    for (std::size_t i : part) counts[s.stratum[i] ? static_cast<long>(*s.stratum[i]) : -1][p] += 1;
  };
  add(s.train, 0);
  add(s.val, 1);
  add(s.test, 2);
  for (const auto& [stratum, c3] : counts) {
    const double size = c3[0] + c3[1] + c3[2];
    EXPECT_LE(std::abs(c3[0] - 0.8 * size), 1.0) << stratum;
    EXPECT_LE(std::abs(c3[1] - 0.1 * size), 1.0) << stratum;
    EXPECT_LE(std::abs(c3[2] - 0.1 * size), 1.0) << stratum;
  }
}

TEST(StratifiedSplit, StratumShareAgreesAcrossSplitsOnDefaultSet) {
  const auto synth = synth_generate(SynthConfig{});
  const auto s = stratified_split(synth.clean_truth, SplitSpec{});
  const std::vector<std::size_t>* parts[] = {&s.train, &s.val, &s.test};
  std::map<long, std::array<double, 3>> share;
  for (int p = 0; p < 3; ++p) {
    for (std::size_t i : *parts[p]) {
      share[s.stratum[i] ? static_cast<long>(*s.stratum[i]) : -1][p] +=
          1.0 / static_cast<double>(parts[p]->size());
    }
  }
  for (const auto& [stratum, f] : share) {
    EXPECT_LT(std::max({f[0], f[1], f[2]}) - std::min({f[0], f[1], f[2]}), 0.02) << stratum;
  }
}

TEST(StratifiedSplit, DeterministicAndSeedSensitive) {
  const auto synth = synth_generate(SynthConfig{});
  SplitSpec spec;
  const auto a = stratified_split(synth.clean_truth, spec);
  const auto b = stratified_split(synth.clean_truth, spec);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.val, b.val);
  spec.seed = 1;
  EXPECT_NE(stratified_split(synth.clean_truth, spec).val, a.val);
}

TEST(StratifiedSplit, RejectsBadRatios) {
  BinaryMatrix t(4, 1);
  SplitSpec spec{0.5, 0.3, 0.3, 0};
  EXPECT_THROW(stratified_split(t, spec), ConfigError);
  spec = {1.0, 0.0, 0.0, 0};
  EXPECT_THROW(stratified_split(t, spec), ConfigError);
}

TEST(Synth, DeterministicForSeed) {
  SynthConfig c;
  c.n = 300;
  const auto a = synth_generate(c);
  const auto b = synth_generate(c);
  EXPECT_EQ(a.dataset.features, b.dataset.features);
  EXPECT_EQ(a.dataset.truth, b.dataset.truth);
  EXPECT_EQ(a.records, b.records);
  EXPECT_EQ(a.dataset.image_ids, b.dataset.image_ids);
  c.seed = 1;
  EXPECT_NE(synth_generate(c).dataset.features, a.dataset.features);
}

TEST(Synth, NoFlipNoiseMeansCleanTruth) {
  SynthConfig c;
  c.flip_noise_rate = 0.0;
  const auto s = synth_generate(c);
  EXPECT_EQ(s.dataset.truth, s.clean_truth);
}

TEST(Synth, FlipNoiseOnlyTouchesTrainingRows) {
  const auto s = synth_generate(SynthConfig{});
  EXPECT_NE(s.dataset.truth, s.clean_truth);
  for (const auto* part : {&s.split.val, &s.split.test}) {
    EXPECT_EQ(s.dataset.truth.select_rows(*part), s.clean_truth.select_rows(*part));
  }
}

TEST(Synth, DefaultShape) {
  const auto s = synth_generate(SynthConfig{});
  EXPECT_EQ(s.dataset.size(), 2000u);
  EXPECT_EQ(s.dataset.labels.size(), 12u);
  std::size_t children = 0;
  for (std::size_t j = 0; j < 12; ++j) children += s.dataset.labels.parent_column(j) ? 1 : 0;
  EXPECT_EQ(children, 2u);
  EXPECT_TRUE(is_hierarchy_closed(s.dataset.truth, s.dataset.labels));
  EXPECT_NO_THROW(s.dataset.validate());
  ASSERT_TRUE(s.holdout.has_value());
  EXPECT_EQ(s.holdout->prompt.rfind("a photo with ", 0), 0u);
}

TEST(Synth, RecordsConsolidateToTruth) {
  SynthConfig c;
  c.n = 400;
  const auto s = synth_generate(c);
  const auto t = propagate_hierarchy(
      consolidate(s.records, s.dataset.labels, s.dataset.image_ids), s.dataset.labels);
  EXPECT_EQ(t, s.dataset.truth);
}

TEST(Synth, RejectsBadConfig) {
  SynthConfig c;
  c.n = 0;
  EXPECT_THROW(synth_generate(c), ConfigError);
  c = {};
  c.flip_noise_rate = 1.5;
  EXPECT_THROW(synth_generate(c), ConfigError);
  c = {};
  c.confusion = 1.0;
  EXPECT_THROW(synth_generate(c), ConfigError);
}

// The model itself as a probe: with negligible feature noise every class is
// separable. (Exactly zero noise gives label-free images an all-zero feature
// vector, which the encoder rejects.)
TEST(Synth, SeparableWithoutNoise) {
  SynthConfig c;
  c.n = 400;
  c.noise_std = 1e-3;
  c.flip_noise_rate = 0.0;
  c.compositional_holdout = false;
  auto setup = testing::make_setup(c);
  const auto& d = setup.synth.dataset;
  setup.data.train = {d.features, d.truth};
  setup.data.val = {};
  train::TrainConfig tc;
  tc.epochs = 30;
  const auto r = train::train(setup.data, setup.model_config, tc);
  const std::size_t ks[] = {1};
  const auto report = train::evaluate_model(r.model, setup.data.train, setup.data.label_texts, ks);
  for (std::size_t j = 0; j < report.ap_per_class.size(); ++j) {
    ASSERT_TRUE(report.ap_per_class[j].has_value());
    EXPECT_GT(*report.ap_per_class[j], 0.99) << "class " << j;
  }
}

TEST(DatasetIo, RoundTrip) {
  SynthConfig c;
  c.n = 120;
  const auto s = synth_generate(c);
  const auto dir = std::filesystem::temp_directory_path() / "mlcl_data_test_roundtrip";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  write_dataset(dir, s.dataset);
  const auto back = read_dataset(dir);
  EXPECT_EQ(back.image_ids, s.dataset.image_ids);
  EXPECT_EQ(back.features, s.dataset.features);
  EXPECT_EQ(back.truth, s.dataset.truth);
  EXPECT_TRUE(back.labels == s.dataset.labels);
  std::filesystem::remove_all(dir);

  EXPECT_EQ(annotations_from_jsonl(annotations_to_jsonl(s.records)), s.records);
  const auto split = split_from_json(split_to_json(s.split, s.dataset.image_ids, SplitSpec{}),
                                     s.dataset.image_ids);
  EXPECT_EQ(split.train, s.split.train);
  EXPECT_EQ(split.val, s.split.val);
  EXPECT_EQ(split.test, s.split.test);
}

TEST(DatasetIo, LabelsCsvFields) {
  LabelDef d = label(4, "Pool, indoor", 2, 0.7);
  d.description = "an \"indoor\" pool";
  d.category = "Facilities";
  d.prompt_mode = PromptMode::kDescription;
  const LabelSet labels({label(2, "Pool"), d});
  const std::string csv = labels_to_csv(labels);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "class_id,name,description,category,parent_id,prompt_mode,agreement_threshold");
  EXPECT_TRUE(labels_from_csv(csv) == labels);
}

TEST(DatasetIo, RejectsMalformedFiles) {
  EXPECT_ANY_THROW(features_from_csv("image_id,f0\na,1\na,2\n"));
  EXPECT_ANY_THROW(features_from_csv("image_id,f0\na,x\n"));
  EXPECT_ANY_THROW(features_from_csv("image_id,f0,f1\na,1\n"));
  EXPECT_ANY_THROW(annotations_from_jsonl("{\"image_id\":\"a\"}\n"));
  const LabelSet labels({label(1, "a")});
  const std::vector<std::string> ids = {"x"};
  EXPECT_ANY_THROW(ground_truth_from_jsonl(R"({"image_id":"y","positive_class_ids":[1]})", ids, labels));
  EXPECT_ANY_THROW(ground_truth_from_jsonl(R"({"image_id":"x","positive_class_ids":[2]})", ids, labels));
}

}  // namespace
}  // namespace mlcl::data
