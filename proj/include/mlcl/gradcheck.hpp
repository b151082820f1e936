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

#ifndef MLCL_GRADCHECK_HPP_
#define MLCL_GRADCHECK_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mlcl/matrix.hpp"
#include "mlcl/tape.hpp"

namespace mlcl::grad {

// Builds a scalar loss on a fresh tape. `params` holds one parameter node per
// matrix handed to finite_difference_check, in the same order. Must be
// deterministic given the parameter values.
using GraphBuilder =
    std::function<NodeRef(Tape& tape, std::span<const NodeRef> params)>;

struct GradCheckOptions {
  double step = 1e-5;
  // Coordinates checked per parameter; 0 checks every coordinate.
  std::size_t max_coords_per_param = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  // Location and values at the worst coordinate.
  std::size_t worst_param = 0;
  std::size_t worst_coord = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// |a - b| / max(|a|, |b|, 1e-12).
double relative_error(double a, double b);

// Compares tape gradients against central differences
// (L(p + h) - L(p - h)) / 2h coordinate by coordinate. Throws NumericError
// if any loss evaluation is not finite.
GradCheckResult finite_difference_check(const GraphBuilder& builder,
                                        std::vector<Matrix> params,
                                        const GradCheckOptions& options = {});

}  // namespace mlcl::grad

#endif  // MLCL_GRADCHECK_HPP_
