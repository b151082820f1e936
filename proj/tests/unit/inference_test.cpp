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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "json.hpp"
#include "mlcl/errors.hpp"
#include "mlcl/inference.hpp"
#include "mlcl/loss.hpp"
#include "mlcl/metrics.hpp"
#include "mlcl/synth.hpp"
#include "mlcl/text_io.hpp"
#include "mlcl/trainer.hpp"
#include "test_support.hpp"

namespace mlcl::infer {
namespace {

struct Trained {
  testing::SynthSetup setup;
  model::DualEncoderModel model;
};

const Trained& trained() {
  static const Trained t = [] {
    auto s = testing::make_setup(data::SynthConfig{});
    auto r = train::train(s.data, s.model_config, train::TrainConfig{});
    return Trained{std::move(s), std::move(r.model)};
  }();
  return t;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  return ab / std::sqrt(aa * bb);
}

// Identity towers: image [1, 0] meets text embeddings [1, 0] and [0, 1].
TEST(Predict, ProbabilityOfOrthogonalAndAlignedPairs) {
  for (double s : {0.0, 2.0, std::log(100.0)}) {
    model::ModelConfig c;
    c.d_in = 2;
    c.d_i = 2;
    c.d_e = 2;
    c.d_t = 2;
    c.vocab_size = 2;
    c.n_layers_img = 0;
    c.n_layers_txt = 0;
    c.logit_scale_init = s;
    auto m = model::init_model(c);
    m.parameter("img.proj").value = Matrix::identity(2);
    m.parameter("txt.proj").value = Matrix::identity(2);
    m.parameter("txt.token_embedding").value = Matrix::identity(2);
    const std::vector<model::TokenizedText> texts = {{{0}, "x"}, {{1}, "y"}};
    const Matrix p = predict(m, Matrix{{1, 0}}, texts);
    EXPECT_EQ(p(0, 1), 0.5);  // cosine 0
    EXPECT_NEAR(p(0, 0), loss::sigmoid(std::exp(s)), 1e-15);
    if (s == std::log(100.0)) {
      EXPECT_NEAR(p(0, 0), 1.0, 1e-15);
    }
  }
}

TEST(Predict, BatchMatchesSingleCallsBitwise) {
  const auto& t = trained();
  const Matrix batch = t.setup.data.val.features.select_rows(std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7});
  const Matrix p = predict(t.model, batch, t.setup.data.label_texts);
  for (std::size_t i = 0; i < 8; ++i) {
    const std::vector<std::size_t> one = {i};
    const Matrix single = predict(t.model, batch.select_rows(one), t.setup.data.label_texts);
    for (std::size_t j = 0; j < p.cols(); ++j) EXPECT_EQ(single(0, j), p(i, j));
  }
}

TEST(Predict, RankOrderFollowsRawCosine) {
  const auto& t = trained();
  const Matrix& x = t.setup.data.val.features;
  const Matrix p = predict(t.model, x, t.setup.data.label_texts);
  const auto raw = model::similarity(t.model, model::encode_images(t.model, x),
                                     model::encode_texts(t.model, t.setup.data.label_texts))
                       .raw;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t a = 0; a < p.cols(); ++a) {
      for (std::size_t b = 0; b < p.cols(); ++b) {
        if (raw(i, a) < raw(i, b)) {
          EXPECT_LE(p(i, a), p(i, b));
        }
      }
    }
  }
}

TEST(ZeroShot, TrainedLabelTextReproducesColumn) {
  const auto& t = trained();
  const auto texts = t.setup.synth.dataset.labels.label_texts();
  const Matrix& x = t.setup.data.val.features;
  const Matrix p = predict(t.model, x, t.setup.data.label_texts);
  for (std::size_t j = 0; j < texts.size(); ++j) {
    const std::vector<std::string> prompt = {texts[j]};
    const Matrix z = zero_shot(t.model, t.setup.vocab, x, prompt);
    for (std::size_t i = 0; i < x.rows(); ++i) ASSERT_EQ(z(i, 0), p(i, j));
  }
}

TEST(ZeroShot, CompositionalHoldout) {
  const auto& t = trained();
  const auto& h = *t.setup.synth.holdout;
  const std::vector<std::string> prompt = {h.prompt};
  const Matrix z = zero_shot(t.model, t.setup.vocab, t.setup.synth.dataset.features, prompt);
  const auto ap = metrics::average_precision(metrics::column(z, 0), h.truth);
  ASSERT_TRUE(ap.has_value());
  EXPECT_GT(*ap, 0.8);
}

TEST(ZeroShot, TokenPermutationInvariance) {
  const auto& t = trained();
  const auto& h = *t.setup.synth.holdout;
  auto words = model::tokenize(h.prompt);
  std::reverse(words.begin(), words.end());
  std::string reversed;
  for (const auto& w : words) reversed += (reversed.empty() ? "" : " ") + w;
  const std::vector<std::string> prompts = {h.prompt, reversed};
  const Matrix z = zero_shot(t.model, t.setup.vocab, t.setup.data.val.features, prompts);
  for (std::size_t i = 0; i < z.rows(); ++i) EXPECT_NEAR(z(i, 0), z(i, 1), 1e-14);
}

TEST(ZeroShot, Errors) {
  const auto& t = trained();
  const std::vector<std::string> none;
  EXPECT_THROW(zero_shot(t.model, t.setup.vocab, t.setup.data.val.features, none), ConfigError);
  const std::vector<std::string> unknown = {"zebra crossing"};
  EXPECT_THROW(zero_shot(t.model, t.setup.vocab, t.setup.data.val.features, unknown), ConfigError);
}

TEST(PairBaseline, SoftmaxIdentities) {
  EXPECT_EQ(pair_softmax_second(1.5, 1.5), 0.5);
  EXPECT_NEAR(pair_softmax_second(0.0, 20.0), 1.0, 1e-8);
  for (double shift : {-50.0, -1.0, 3.0, 400.0}) {
    EXPECT_NEAR(pair_softmax_second(0.3 + shift, -0.7 + shift), pair_softmax_second(0.3, -0.7),
                1e-12);
  }
}

TEST(PairBaseline, EqualsSigmoidOfLogitDifference) {
  const auto& t = trained();
  std::vector<std::string> names;
  for (const auto& l : t.setup.synth.dataset.labels.labels()) names.push_back(l.name);
  const Matrix& x = t.setup.data.val.features;
  const Matrix p = clip_pair_baseline(t.model, t.setup.vocab, x, names);
  const Matrix ie = model::encode_images(t.model, x);
  for (std::size_t j = 0; j < names.size(); ++j) {
    std::vector<model::TokenizedText> pair = {
        t.setup.vocab.encode("a photo", model::OovPolicy::kSkip),
        t.setup.vocab.encode("a photo of " + names[j], model::OovPolicy::kSkip)};
    const Matrix s = model::similarity(t.model, ie, model::encode_texts(t.model, pair)).scaled;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      // Two-way softmax, shifted by the max.
      const double m = std::max(s(i, 0), s(i, 1));
      const double e0 = std::exp(s(i, 0) - m);
      const double e1 = std::exp(s(i, 1) - m);
      EXPECT_NEAR(p(i, j), e1 / (e0 + e1), 1e-12);
      EXPECT_GT(p(i, j), 0.0);
      EXPECT_LT(p(i, j), 1.0);
    }
  }
}

TEST(Thresholds, FullRecallKeepsLowestPositive) {
  const Matrix s{{0.9}, {0.2}, {0.4}, {0.1}, {0.3}};
  BinaryMatrix t(5, 1);
  t.set(0, 0, true);
  t.set(2, 0, true);
  const auto table = select_thresholds(s, t, 1.0);
  EXPECT_EQ(table.per_class[0].threshold, 0.4);
  EXPECT_EQ(table.recall, 1.0);
  EXPECT_EQ(table.drop_fraction, 3.0 / 5.0);
}

TEST(Thresholds, SeparatedScoresDropAllNegatives) {
  const Matrix s{{0.9, 0.1}, {0.8, 0.7}, {0.2, 0.6}, {0.1, 0.3}};
  BinaryMatrix t(4, 2);
  t.set(0, 0, true);
  t.set(1, 0, true);
  t.set(1, 1, true);
  t.set(2, 1, true);
  const auto table = select_thresholds(s, t, 0.99);
  EXPECT_EQ(table.recall, 1.0);
  EXPECT_EQ(table.drop_fraction, 4.0 / 8.0);
}

TEST(Thresholds, PartialRecallAndUndefinedClass) {
  // Ten positives at 0.1..1.0; 0.8 recall needs eight of them.
  Matrix s(10, 2);
  BinaryMatrix t(10, 2);
  for (std::size_t i = 0; i < 10; ++i) {
    s(i, 0) = 0.1 * static_cast<double>(i + 1);
    t.set(i, 0, true);
  }
  const auto table = select_thresholds(s, t, 0.8);
  EXPECT_DOUBLE_EQ(*table.per_class[0].threshold, 0.3);
  EXPECT_EQ(table.per_class[0].recall, 0.8);
  EXPECT_FALSE(table.per_class[1].threshold.has_value());
  EXPECT_EQ(table.per_class[1].drop_fraction, 0.0);
  EXPECT_EQ(table.per_class[1].recall, 1.0);
  EXPECT_EQ(table.drop_fraction, 2.0 / 20.0);
}

TEST(Thresholds, MonotoneInTargetRecall) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const std::size_t n = 1 + rng.below(30);
    const std::size_t l = 1 + rng.below(4);
    const Matrix s = testing::random_matrix(rng, n, l);
    const BinaryMatrix t = testing::random_binary(rng, n, l, 0.4);
    const double lo = rng.uniform(0.01, 1.0);
    const double hi = rng.uniform(lo, 1.0);
    const auto a = select_thresholds(s, t, lo);
    const auto b = select_thresholds(s, t, hi);
    for (std::size_t j = 0; j < l; ++j) {
      if (a.per_class[j].threshold) {
        EXPECT_LE(*b.per_class[j].threshold, *a.per_class[j].threshold);
        EXPECT_GE(a.per_class[j].recall, lo - 1e-12);
      }
    }
    EXPECT_LE(b.drop_fraction, a.drop_fraction);
  }
}

TEST(Thresholds, TrainedModelKeepsRecallAndDropsMost) {
  const auto& t = trained();
  const auto& val = t.setup.data.val;
  const auto table = select_thresholds(predict(t.model, val.features, t.setup.data.label_texts),
                                       val.truth, 0.99);
  EXPECT_GE(table.recall, 0.99);
  EXPECT_GT(table.drop_fraction, 0.7);
}

TEST(Thresholds, CsvRoundTripAndApply) {
  Matrix s{{0.9, 0.1}, {0.2, 0.3}};
  BinaryMatrix t(2, 2);
  t.set(0, 0, true);
  const auto table = select_thresholds(s, t, 1.0);
  const int ids[] = {4, 8};
  const std::string csv = thresholds_to_csv(table, ids);
  EXPECT_EQ(csv, "class_id,threshold,recall,drop_fraction\n4,0.9,1,0.5\n8,,1,0\n");
  const auto back = thresholds_from_csv(csv, ids);
  EXPECT_EQ(back.per_class[0].threshold, 0.9);
  EXPECT_FALSE(back.per_class[1].threshold.has_value());
  const auto applied = apply_thresholds(back, Matrix{{0.5, 0.5}, {0.95, 0.5}}, t);
  EXPECT_EQ(applied.recall, 0.0);
  EXPECT_EQ(applied.drop_fraction, 1.0 / 4.0);
  const int wrong[] = {4, 9};
  EXPECT_ANY_THROW(thresholds_from_csv(csv, wrong));
}

TEST(Predictions, JsonlOmitsScoresBelowThreshold) {
  const Matrix s{{0.9, 0.1}, {0.2, 0.3}};
  BinaryMatrix t(2, 2);
  t.set(0, 0, true);
  const auto table = select_thresholds(s, t, 1.0);
  const int ids[] = {4, 8};
  const std::vector<std::string> images = {"a", "b"};
  const std::string all = predictions_to_jsonl(images, s, ids);
  const std::string kept = predictions_to_jsonl(images, s, ids, &table);
  const auto first = nlohmann::json::parse(all.substr(0, all.find('\n')));
  EXPECT_EQ(first["image_id"], "a");
  EXPECT_EQ(first["scores"].size(), 2u);
  const auto second = nlohmann::json::parse(kept.substr(kept.find('\n') + 1));
  EXPECT_EQ(second["image_id"], "b");
  EXPECT_EQ(second["scores"].size(), 1u);  // class 8 has no threshold
  EXPECT_TRUE(second["scores"].contains("8"));
}

TEST(Embeddings, UnitRowsAndDeterministicFile) {
  const auto& t = trained();
  const auto& d = t.setup.synth.dataset;
  const Matrix e = model::encode_images(t.model, d.features);
  for (std::size_t i = 0; i < e.rows(); ++i) {
    double s = 0.0;
    for (double v : e.row(i)) s += v * v;
    EXPECT_NEAR(std::sqrt(s), 1.0, 1e-10);
  }
  const auto dir = std::filesystem::temp_directory_path();
  const auto a = dir / "mlcl_inference_test_emb_a.csv";
  const auto b = dir / "mlcl_inference_test_emb_b.csv";
  export_embeddings(a, t.model, d.image_ids, d.features);
  export_embeddings(b, t.model, d.image_ids, d.features);
  const std::string text = io::read_file(a);
  EXPECT_EQ(text, io::read_file(b));
  EXPECT_EQ(text.substr(0, text.find('\n')).rfind("image_id,e0,", 0), 0u);
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}

// Images sit closer to the mean embedding of their own class than to the
// means of classes they do not have.
TEST(Embeddings, IntraClassCosineExceedsInterClass) {
  const auto& t = trained();
  const auto& d = t.setup.synth.dataset;
  const Matrix e = model::encode_images(t.model, d.features);
  const std::size_t l = d.truth.cols();
  Matrix means(l, e.cols());
  for (std::size_t j = 0; j < l; ++j) {
    for (std::size_t i = 0; i < e.rows(); ++i) {
      if (!d.truth(i, j)) continue;
      for (std::size_t k = 0; k < e.cols(); ++k) means(j, k) += e(i, k);
    }
  }
  double intra = 0.0, inter = 0.0;
  std::size_t ni = 0, no = 0;
  for (std::size_t i = 0; i < e.rows(); ++i) {
    for (std::size_t j = 0; j < l; ++j) {
      const double c = cosine(e.row(i), means.row(j));
      if (d.truth(i, j)) {
        intra += c;
        ++ni;
      } else {
        inter += c;
        ++no;
      }
    }
  }
  EXPECT_GT(intra / static_cast<double>(ni), inter / static_cast<double>(no));
}

TEST(Histogram, CountsEveryPrediction) {
  const auto& t = trained();
  const auto& val = t.setup.data.val;
  const auto sim = model::similarity(t.model, model::encode_images(t.model, val.features),
                                     model::encode_texts(t.model, t.setup.data.label_texts));
  const auto lines = io::split_lines(logit_histogram_csv(sim.scaled, val.truth, t.model.logit_scale()));
  ASSERT_EQ(lines.size(), 21u);
  EXPECT_EQ(lines[0], "bin_lo,bin_hi,positives,negatives");
  std::size_t pos = 0, neg = 0;
  for (std::size_t b = 1; b < lines.size(); ++b) {
    const auto c3 = lines[b].rfind(',');
    const auto c2 = lines[b].rfind(',', c3 - 1);
    pos += std::stoul(lines[b].substr(c2 + 1, c3 - c2 - 1));
    neg += std::stoul(lines[b].substr(c3 + 1));
  }
  EXPECT_EQ(pos, val.truth.count());
  EXPECT_EQ(pos + neg, val.truth.rows() * val.truth.cols());
}

}  // namespace
}  // namespace mlcl::infer
