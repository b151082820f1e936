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

// Binary cross entropy over a temperature-scaled sigmoid.
//
// With raw cosine logits x, temperature tau = exp(-logit_scale) and the
// scaled logit z = x / tau, the per-element loss is
//
//   l(x, y) = -[p * y * log sigmoid(z) + (1 - y) * log(1 - sigmoid(z))]
//           =   p * y * softplus(-z)   + (1 - y) * softplus(z)
//
// and the batch loss is the mean over all N*L elements. The softplus form
// is evaluated as max(z, 0) + log1p(exp(-|z|)), which never overflows.
// The positive weight p multiplies the positive term only.

#ifndef MLCL_LOSS_HPP_
#define MLCL_LOSS_HPP_

#include <cmath>
#include <span>
#include <vector>

#include "mlcl/matrix.hpp"
#include "mlcl/tape.hpp"

namespace mlcl::loss {

struct TemperedScale {
  double logit_scale = 0.0;

  double tau() const { return std::exp(-logit_scale); }
  double inverse_tau() const { return std::exp(logit_scale); }
};

struct LossBatch {
  Matrix raw_logits;                // x_ij, N x L
  Matrix targets;                   // y_ij in {0, 1}
  std::vector<double> pos_weights;  // p_j, length L, all > 0

  // Throws DimensionError / NumericError / ConfigError on broken invariants.
  void validate() const;
};

double sigmoid(double z);
// log(1 + exp(z)) without overflow.
double softplus(double z);

// Mean loss of a batch. Throws NumericError on NaN input.
double tempered_bce_value(const LossBatch& batch, TemperedScale scale);

// Same loss as a tape node, differentiable in both the raw logits and the
// 1x1 logit_scale node.
grad::NodeRef tempered_bce(grad::Tape& tape, grad::NodeRef raw_logits,
                           grad::NodeRef logit_scale, const Matrix& targets,
                           std::span<const double> pos_weights);

// Closed-form d l / d x_ij of the per-element (unreduced) loss:
//   (1/tau) * [sigmoid(z) (1 - y) - p y (1 - sigmoid(z))]
// which is (1/tau) (sigmoid(z) - y) when p = 1.
Matrix analytic_grad_logits(const LossBatch& batch, TemperedScale scale);

// |dl/dx| = gap / tau for each tau, at a fixed prediction gap
// |sigmoid(z) - y|. Throws ConfigError for tau <= 0 or gap outside [0, 1].
std::vector<double> hardness_profile(std::span<const double> tau_values,
                                     double gap);

}  // namespace mlcl::loss

#endif  // MLCL_LOSS_HPP_
