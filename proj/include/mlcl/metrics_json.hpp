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


#ifndef MLCL_METRICS_JSON_HPP_
#define MLCL_METRICS_JSON_HPP_

#include <span>

#include "json.hpp"
#include "mlcl/metrics.hpp"

namespace mlcl::metrics {

// The object report_to_json() serializes.
nlohmann::ordered_json report_json(const MetricReport& report,
                                   std::span<const int> class_ids);

}  // namespace mlcl::metrics

#endif  // MLCL_METRICS_JSON_HPP_
