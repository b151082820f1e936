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

#include "mlcl/loss.hpp"

#include <algorithm>
#include <string>

#include "mlcl/errors.hpp"

namespace mlcl::loss {
namespace {

void check_shapes(const Matrix& logits, const Matrix& targets,
                  std::span<const double> pos_weights) {
  if (!logits.same_shape(targets)) {
    throw DimensionError("tempered_bce: logits and targets differ in shape");
  }
  if (pos_weights.size() != logits.cols()) {
    throw DimensionError("tempered_bce: " + std::to_string(pos_weights.size()) +
                         " positive weights for " +
                         std::to_string(logits.cols()) + " classes");
  }
}

void check_values(const Matrix& logits, const Matrix& targets,
                  std::span<const double> pos_weights, double logit_scale) {
  for (double v : logits.data()) {
    if (std::isnan(v)) throw NumericError("tempered_bce: NaN logit");
  }
  for (double t : targets.data()) {
    if (t != 0.0 && t != 1.0) {
      throw ConfigError("tempered_bce: targets must be 0 or 1");
    }
  }
  for (double p : pos_weights) {
    if (!(p > 0.0)) throw ConfigError("tempered_bce: positive weights must be > 0");
  }
  if (std::isnan(logit_scale)) throw NumericError("tempered_bce: NaN logit_scale");
}

double element_loss(double z, double y, double p) {
  return y != 0.0 ? p * softplus(-z) : softplus(z);
}

// d l / d z for the scaled logit z.
double element_grad(double z, double y, double p) {
  return y != 0.0 ? -p * sigmoid(-z) : sigmoid(z);
}

}  // namespace

void LossBatch::validate() const {
  check_shapes(raw_logits, targets, pos_weights);
  check_values(raw_logits, targets, pos_weights, 0.0);
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double tempered_bce_value(const LossBatch& batch, TemperedScale scale) {
  check_shapes(batch.raw_logits, batch.targets, batch.pos_weights);
  check_values(batch.raw_logits, batch.targets, batch.pos_weights,
               scale.logit_scale);
  const double s = scale.inverse_tau();
  const Matrix& x = batch.raw_logits;
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      total += element_loss(x(i, j) * s, batch.targets(i, j),
                            batch.pos_weights[j]);
    }
  }
  return total / static_cast<double>(x.size());
}

grad::NodeRef tempered_bce(grad::Tape& tape, grad::NodeRef raw_logits,
                           grad::NodeRef logit_scale, const Matrix& targets,
                           std::span<const double> pos_weights) {
  const Matrix& x = tape.value(raw_logits);
  const double ls = tape.value(logit_scale).item();
  check_shapes(x, targets, pos_weights);
  check_values(x, targets, pos_weights, ls);

  const double s = std::exp(ls);
  const double inv_count = 1.0 / static_cast<double>(x.size());
  // dz_ij/dx_ij = s, dz_ij/dlogit_scale = z_ij.
  Matrix dz(x.rows(), x.cols());
  Matrix z(x.rows(), x.cols());
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      const double zij = x(i, j) * s;
      const double y = targets(i, j);
      const double p = pos_weights[j];
      z(i, j) = zij;
      total += element_loss(zij, y, p);
      dz(i, j) = element_grad(zij, y, p) * inv_count;
    }
  }
  const double value = total * inv_count;
  if (!std::isfinite(value)) throw NumericError("tempered_bce: non-finite loss");

  auto backward = [dz = std::move(dz), z = std::move(z), s](
                      const Matrix& out_grad,
                      std::span<Matrix* const> input_grads) {
    const double g = out_grad[0];
    if (Matrix* gx = input_grads[0]) {
      for (std::size_t k = 0; k < dz.size(); ++k) (*gx)[k] += g * dz[k] * s;
    }
    if (Matrix* gs = input_grads[1]) {
      double acc = 0.0;
      for (std::size_t k = 0; k < dz.size(); ++k) acc += dz[k] * z[k];
      (*gs)[0] += g * acc;
    }
  };
  return tape.custom("tempered_bce", {raw_logits, logit_scale},
                     Matrix::scalar(value), std::move(backward));
}

Matrix analytic_grad_logits(const LossBatch& batch, TemperedScale scale) {
  check_shapes(batch.raw_logits, batch.targets, batch.pos_weights);
  const double inv_tau = scale.inverse_tau();
  const Matrix& x = batch.raw_logits;
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      const double z = x(i, j) * inv_tau;
      const double y = batch.targets(i, j);
      const double p = batch.pos_weights[j];
      // 1 - sigmoid(z) == sigmoid(-z), without cancellation for large z.
      out(i, j) = inv_tau * (sigmoid(z) * (1.0 - y) - p * y * sigmoid(-z));
    }
  }
  return out;
}

std::vector<double> hardness_profile(std::span<const double> tau_values,
                                     double gap) {
  if (!(gap >= 0.0 && gap <= 1.0)) {
    throw ConfigError("hardness_profile: gap must lie in [0, 1]");
  }
  std::vector<double> out;
  out.reserve(tau_values.size());
  for (double tau : tau_values) {
    if (!(tau > 0.0)) throw ConfigError("hardness_profile: tau must be > 0");
    out.push_back(gap / tau);
  }
  return out;
}

}  // namespace mlcl::loss
