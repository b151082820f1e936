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
#include <vector>

#include <gtest/gtest.h>

#include "mlcl/errors.hpp"
#include "mlcl/gradcheck.hpp"
#include "mlcl/loss.hpp"
#include "mlcl/model.hpp"
#include "mlcl/tape.hpp"
#include "test_support.hpp"

namespace mlcl::grad {
namespace {

using testing::random_matrix;

// Reduces a node to a scalar through a fixed random mixing so that every
// output entry gets a distinct, non-trivial upstream gradient.
NodeRef mix(Tape& tape, NodeRef x, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed ^ 0x5eedULL);
  const NodeRef c = tape.constant(random_matrix(rng, cols, 3));
  return tape.sum(tape.tanh_act(tape.matmul(x, c)));
}

double check(const GraphBuilder& f, std::vector<Matrix> params) {
  return finite_difference_check(f, std::move(params)).max_rel_error;
}

TEST(Matmul, Examples) {
  Tape tape;
  const Matrix m{{1, 2}, {3, 4}};
  const auto id = tape.constant(Matrix::identity(2));
  EXPECT_EQ(tape.value(tape.matmul(id, tape.constant(m))), m);
  const auto r = tape.matmul(tape.constant(m), tape.constant(Matrix{{1}, {1}}));
  EXPECT_EQ(tape.value(r), (Matrix{{3}, {7}}));
}

TEST(Matmul, GradientMatchesFiniteDifferences) {
  Rng rng(1);
  const double err = check(
      [](Tape& t, std::span<const NodeRef> p) { return mix(t, t.matmul(p[0], p[1]), 2, 1); },
      {random_matrix(rng, 3, 4), random_matrix(rng, 4, 2)});
  EXPECT_LT(err, 1e-6);
}

TEST(Matmul, ShapeMismatchThrows) {
  Tape tape;
  EXPECT_THROW(tape.matmul(tape.constant(Matrix(2, 3)), tape.constant(Matrix(2, 3))),
               DimensionError);
}

TEST(RowL2Normalize, Examples) {
  Tape tape;
  const auto r = tape.row_l2_normalize(tape.constant(Matrix{{3, 4}}));
  EXPECT_DOUBLE_EQ(tape.value(r)(0, 0), 0.6);
  EXPECT_DOUBLE_EQ(tape.value(r)(0, 1), 0.8);
  const Matrix unit{{1, 0, 0}, {0, 0, -1}};
  EXPECT_EQ(tape.value(tape.row_l2_normalize(tape.constant(unit))), unit);
}

TEST(RowL2Normalize, RowNormsAreOne) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    Tape tape;
    const auto y = tape.row_l2_normalize(tape.constant(random_matrix(rng, 4, 1 + trial % 7)));
    for (std::size_t i = 0; i < 4; ++i) {
      double s = 0.0;
      for (double v : tape.value(y).row(i)) s += v * v;
      EXPECT_NEAR(std::sqrt(s), 1.0, 1e-12);
    }
  }
}

TEST(RowL2Normalize, ZeroRowThrows) {
  Tape tape;
  EXPECT_THROW(tape.row_l2_normalize(tape.constant(Matrix{{1, 1}, {0, 0}})), NumericError);
}

TEST(RowL2Normalize, GradientMatchesFiniteDifferences) {
  Rng rng(3);
  const double err = check(
      [](Tape& t, std::span<const NodeRef> p) { return mix(t, t.row_l2_normalize(p[0]), 5, 3); },
      {random_matrix(rng, 4, 5)});
  EXPECT_LT(err, 1e-6);
}

TEST(Affine, Examples) {
  Tape tape;
  const Matrix x{{1, 2}, {3, 4}, {5, 6}};
  const Matrix beta{{0.5, -1, 2}};
  const auto y = tape.affine(tape.constant(x), tape.constant(Matrix(2, 3)), tape.constant(beta));
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(tape.value(y)(i, j), beta(0, j));
  }
  const auto same = tape.affine(tape.constant(x), tape.constant(Matrix::identity(2)),
                                tape.constant(Matrix(1, 2)));
  EXPECT_EQ(tape.value(same), x);
}

TEST(Affine, GradientMatchesFiniteDifferences) {
  Rng rng(4);
  const double err = check(
      [](Tape& t, std::span<const NodeRef> p) { return mix(t, t.affine(p[0], p[1], p[2]), 4, 4); },
      {random_matrix(rng, 5, 3), random_matrix(rng, 3, 4), random_matrix(rng, 1, 4)});
  EXPECT_LT(err, 1e-6);
}

TEST(Tanh, Examples) {
  Tape tape;
  const auto x = tape.parameter(Matrix{{0.0, 50.0}});
  const auto y = tape.tanh_act(x);
  EXPECT_EQ(tape.value(y)(0, 0), 0.0);
  EXPECT_NEAR(tape.value(y)(0, 1), 1.0, 1e-12);
  const auto g = tape.backward(tape.sum(y));
  EXPECT_EQ(g.at(x)(0, 0), 1.0);
  EXPECT_NEAR(g.at(x)(0, 1), 0.0, 1e-12);
}

TEST(Tanh, GradientMatchesFiniteDifferences) {
  Rng rng(5);
  const double err = check(
      [](Tape& t, std::span<const NodeRef> p) { return mix(t, t.tanh_act(p[0]), 3, 5); },
      {random_matrix(rng, 4, 3, 2.0)});
  EXPECT_LT(err, 1e-6);
}

TEST(GatherRows, DuplicateIndexAccumulates) {
  Tape tape;
  const auto table = tape.parameter(Matrix{{1, 2}, {3, 4}});
  const auto y = tape.gather_rows(table, {0, 0});
  EXPECT_EQ(tape.value(y), (Matrix{{1, 2}, {1, 2}}));
  const auto w = tape.constant(Matrix{{1, 10}, {100, 1000}});
  // sum(y w^T) gives every output row the gradient [101, 1010]; row 0 of the
  // table receives both.
  const auto g = tape.backward(tape.sum(tape.matmul_transposed(y, w)));
  EXPECT_EQ(g.at(table), (Matrix{{202, 2020}, {0, 0}}));
}

TEST(GatherRows, IdentityIndices) {
  Rng rng(6);
  Tape tape;
  const Matrix m = random_matrix(rng, 4, 3);
  EXPECT_EQ(tape.value(tape.gather_rows(tape.constant(m), {0, 1, 2, 3})), m);
}

TEST(GatherRows, OutOfRangeThrows) {
  Tape tape;
  EXPECT_ANY_THROW(tape.gather_rows(tape.constant(Matrix(2, 2)), {2}));
}

TEST(GatherRows, GradientMassIsConserved) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const std::size_t rows = 1 + rng.below(6);
    std::vector<std::size_t> idx(1 + rng.below(10));
    for (auto& i : idx) i = rng.below(rows);
    Tape tape;
    const auto table = tape.parameter(random_matrix(rng, rows, 3));
    const auto y = tape.gather_rows(table, idx);
    tape.backward(mix(tape, y, 3, seed));
    EXPECT_NEAR(sum(tape.grad(table)), sum(tape.grad(y)), 1e-12);
  }
}

TEST(GatherRows, GradientMatchesFiniteDifferences) {
  Rng rng(7);
  const double err = check(
      [](Tape& t, std::span<const NodeRef> p) {
        return mix(t, t.gather_rows(p[0], {2, 0, 2, 1, 2}), 3, 7);
      },
      {random_matrix(rng, 4, 3)});
  EXPECT_LT(err, 1e-6);
}

TEST(MeanPoolRows, Examples) {
  Tape tape;
  const auto same = tape.mean_pool_rows(tape.constant(Matrix{{1, 2}, {1, 2}, {1, 2}}), {3});
  EXPECT_EQ(tape.value(same), (Matrix{{1, 2}}));
  const auto ab = tape.mean_pool_rows(tape.constant(Matrix{{1, 2}, {3, 6}, {7, 7}}), {2, 1});
  EXPECT_EQ(tape.value(ab), (Matrix{{2, 4}, {7, 7}}));
}

TEST(MeanPoolRows, BadSegmentsThrow) {
  Tape tape;
  const auto x = tape.constant(Matrix(3, 2));
  EXPECT_ANY_THROW(tape.mean_pool_rows(x, {2}));
  EXPECT_ANY_THROW(tape.mean_pool_rows(x, {3, 0}));
}

TEST(MeanPoolRows, GradientMatchesFiniteDifferences) {
  Rng rng(8);
  const double err = check(
      [](Tape& t, std::span<const NodeRef> p) { return mix(t, t.mean_pool_rows(p[0], {1, 3, 2}), 4, 8); },
      {random_matrix(rng, 6, 4)});
  EXPECT_LT(err, 1e-6);
}

TEST(ScaleByExp, Examples) {
  Tape tape;
  const Matrix x{{1, -2}, {0.5, 3}};
  EXPECT_EQ(tape.value(tape.scale_by_exp(tape.constant(x), tape.constant(Matrix::scalar(0)))), x);
  const auto d = tape.scale_by_exp(tape.constant(x), tape.constant(Matrix::scalar(std::log(2.0))));
  for (std::size_t k = 0; k < x.size(); ++k) EXPECT_NEAR(tape.value(d)[k], 2 * x[k], 1e-15);
}

TEST(ScaleByExp, GradientMatchesFiniteDifferences) {
  Rng rng(9);
  const double err = check(
      [](Tape& t, std::span<const NodeRef> p) { return mix(t, t.scale_by_exp(p[0], p[1]), 3, 9); },
      {random_matrix(rng, 4, 3), Matrix::scalar(0.7)});
  EXPECT_LT(err, 1e-6);
}

// Every op on randomized shapes, 100 seeds.
TEST(Ops, GradientPropertyOverSeeds) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const std::size_t r = 1 + rng.below(5);
    const std::size_t k = 1 + rng.below(5);
    const std::size_t c = 2 + rng.below(4);
    std::vector<std::size_t> idx(1 + rng.below(6));
    for (auto& i : idx) i = rng.below(r);
    std::vector<std::size_t> seg;
    for (std::size_t left = idx.size(); left > 0;) {
      const std::size_t s = 1 + rng.below(left);
      seg.push_back(s);
      left -= s;
    }
    const double err = check(
        [&](Tape& t, std::span<const NodeRef> p) {
          const auto h = t.tanh_act(t.affine(p[0], p[1], p[2]));      // r x c
          const auto g = t.mean_pool_rows(t.gather_rows(h, idx), seg);  // |seg| x c
          const auto n = t.row_l2_normalize(t.matmul(g, p[3]));         // |seg| x c
          const auto s = t.scale_by_exp(t.matmul_transposed(n, h), p[4]);
          return mix(t, s, r, seed);
        },
        {random_matrix(rng, r, k), random_matrix(rng, k, c), random_matrix(rng, 1, c),
         random_matrix(rng, c, c), Matrix::scalar(rng.uniform(-1.0, 1.0))});
    EXPECT_LT(err, 1e-5) << "seed " << seed;
  }
}

TEST(Backward, SumGivesOnes) {
  Tape tape;
  const auto p = tape.parameter(Matrix(3, 2, 0.25));
  const auto g = tape.backward(tape.sum(p));
  EXPECT_EQ(g.at(p), Matrix(3, 2, 1.0));
}

TEST(Backward, UnusedParameterGetsZeros) {
  Tape tape;
  const auto used = tape.parameter(Matrix(2, 2, 1.0));
  const auto unused = tape.parameter(Matrix(3, 1, 5.0));
  const auto g = tape.backward(tape.sum(tape.tanh_act(used)));
  EXPECT_EQ(g.at(unused), Matrix(3, 1, 0.0));
}

TEST(Backward, NoParameterDependenceGivesZeros) {
  Tape tape;
  const auto p = tape.parameter(Matrix(2, 2, 1.0));
  const auto c = tape.constant(Matrix{{1, 2}, {3, 4}});
  const auto g = tape.backward(tape.sum(tape.tanh_act(c)));
  EXPECT_EQ(g.at(p), Matrix(2, 2, 0.0));
}

TEST(Backward, NonScalarLossThrows) {
  Tape tape;
  const auto p = tape.parameter(Matrix(2, 2, 1.0));
  EXPECT_THROW(tape.backward(p), DimensionError);
}

TEST(Forward, Deterministic) {
  const auto c = testing::random_pipeline_case(77);
  const auto m = model::init_model(c.config);
  Matrix first;
  for (int run = 0; run < 2; ++run) {
    Tape tape;
    const auto b = model::bind(tape, m, model::BindMode::kTrainAll);
    const auto sim = model::similarity(tape, b, model::encode_images(tape, b, c.features),
                                       model::encode_texts(tape, b, c.texts));
    if (run == 0) {
      first = tape.value(sim.scaled);
    } else {
      EXPECT_EQ(tape.value(sim.scaled), first);
    }
  }
}

TEST(GradCheck, QuadraticNorm) {
  Rng rng(10);
  const double err = check(
      [](Tape& t, std::span<const NodeRef> p) {
        // W is a single row, so W W^T = ||W||^2.
        return t.sum(t.matmul_transposed(p[0], p[0]));
      },
      {random_matrix(rng, 1, 6)});
  EXPECT_LT(err, 1e-8);
}

TEST(GradCheck, LossHeadOnly) {
  Rng rng(11);
  const Matrix targets = testing::random_binary(rng, 5, 3).to_matrix();
  const std::vector<double> pw = {1.0, 4.0, 10.0};
  const double err = check(
      [&](Tape& t, std::span<const NodeRef> p) {
        return loss::tempered_bce(t, p[0], p[1], targets, pw);
      },
      {random_matrix(rng, 5, 3), Matrix::scalar(2.0)});
  EXPECT_LT(err, 1e-6);
}

TEST(GradCheck, FullDualEncoder) {
  auto c = testing::random_pipeline_case(12);
  Rng rng(12);
  c.config.d_e = 8;
  c.features = random_matrix(rng, 4, c.config.d_in);
  c.texts.resize(3, c.texts.front());
  c.targets = testing::random_binary(rng, 4, 3).to_matrix();
  c.pos_weights = {1.0, 2.0, 10.0};
  EXPECT_LT(testing::check_pipeline(c).max_rel_error, 1e-5);
}

// With a text width of 1 the normalized text embedding is +-w/|w| no matter
// what feeds it, so every text-tower parameter upstream of the projection
// has an exactly zero gradient.
TEST(GradCheck, WidthOneTowerHasVanishingGradients) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto c = testing::random_pipeline_case(seed);
    c.config.d_t = 1;
    const auto m = model::init_model(c.config);
    Tape tape;
    const auto b = model::bind(tape, m, model::BindMode::kTrainAll);
    const auto lossn = testing::pipeline_loss(tape, m, b.nodes, c);
    const auto g = tape.backward(lossn);
    for (std::size_t k = 0; k < m.parameters().size(); ++k) {
      const auto& name = m.parameters()[k].name;
      if (name.rfind("txt.", 0) == 0 && name != "txt.proj") {
        EXPECT_LE(max_abs(g.at(b.nodes[k])), 1e-12) << name << " seed " << seed;
      }
    }
  }
}

// Coordinates with large curvature: the central difference converges to the
// analytic gradient at O(h^2).
TEST(GradCheck, CentralDifferenceConvergesQuadratically) {
  const auto c = testing::random_pipeline_case(1275);
  std::vector<double> err;
  for (double h : {1e-5, 1e-6, 1e-7}) {
    GradCheckOptions o;
    o.step = h;
    err.push_back(testing::check_pipeline(c, o).max_rel_error);
  }
  EXPECT_LT(err[1], err[0] / 30.0);
  EXPECT_LT(err[2], 1e-5);
}

TEST(GradCheck, RelativeErrorFloor) {
  EXPECT_EQ(relative_error(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(1e-13, 0.0), 1e-13 / 1e-12);
  EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0), 0.5);
}

}  // namespace
}  // namespace mlcl::grad
