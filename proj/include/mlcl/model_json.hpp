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

#ifndef MLCL_MODEL_JSON_HPP_
#define MLCL_MODEL_JSON_HPP_

#include "json.hpp"
#include "mlcl/model.hpp"

namespace mlcl::model {

nlohmann::ordered_json config_to_json(const ModelConfig& config);
// Keys absent from `doc` keep their value from `base`; unknown keys throw.
ModelConfig config_from_json(const nlohmann::json& doc,
                             const ModelConfig& base = {});

}  // namespace mlcl::model

#endif  // MLCL_MODEL_JSON_HPP_
