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

#include "mlcl/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mlcl/errors.hpp"

namespace mlcl::grad {
namespace {

struct Evaluation {
  double loss;
  GradientMap grads;
  std::vector<NodeRef> nodes;
};

Evaluation evaluate(const GraphBuilder& builder,
                    const std::vector<Matrix>& params, bool with_grad) {
  Tape tape;
  std::vector<NodeRef> nodes;
  nodes.reserve(params.size());
  for (const Matrix& p : params) nodes.push_back(tape.parameter(p));
  const NodeRef loss = builder(tape, nodes);
  const double value = tape.value(loss).item();
  if (!std::isfinite(value)) {
    throw NumericError("finite_difference_check: non-finite loss");
  }
  Evaluation out{value, {}, nodes};
  if (with_grad) out.grads = tape.backward(loss);
  return out;
}

}  // namespace

double relative_error(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-12});
  return std::abs(a - b) / denom;
}

GradCheckResult finite_difference_check(const GraphBuilder& builder,
                                        std::vector<Matrix> params,
                                        const GradCheckOptions& options) {
  const Evaluation base = evaluate(builder, params, true);
  std::mt19937_64 rng(options.seed);
  GradCheckResult result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const Matrix& analytic = base.grads.at(base.nodes[p]);
    std::vector<std::size_t> coords(params[p].size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords_per_param != 0 &&
        coords.size() > options.max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_param);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t c : coords) {
      const double original = params[p][c];
      params[p][c] = original + options.step;
      const double up = evaluate(builder, params, false).loss;
      params[p][c] = original - options.step;
      const double down = evaluate(builder, params, false).loss;
      params[p][c] = original;
      const double numeric = (up - down) / (2.0 * options.step);
      const double err = relative_error(analytic[c], numeric);
      ++result.coords_checked;
      if (err > result.max_rel_error || result.coords_checked == 1) {
        result.max_rel_error = err;
        result.worst_param = p;
        result.worst_coord = c;
        result.worst_analytic = analytic[c];
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace mlcl::grad
