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


// JSON readers for the run configuration sections. Keys absent from the
// document keep the value of `base`; unknown keys are ConfigErrors.

#ifndef MLCL_CONFIG_JSON_HPP_
#define MLCL_CONFIG_JSON_HPP_

#include "json.hpp"
#include "mlcl/data.hpp"
#include "mlcl/synth.hpp"
#include "mlcl/trainer.hpp"

namespace mlcl::cli {

data::SplitSpec split_spec_from_json(const nlohmann::json& doc,
                                     const data::SplitSpec& base = {});
data::SynthConfig synth_config_from_json(const nlohmann::json& doc,
                                         const data::SynthConfig& base = {});
train::TrainConfig train_config_from_json(const nlohmann::json& doc,
                                          const train::TrainConfig& base = {});

nlohmann::ordered_json train_config_to_json(const train::TrainConfig& config);

}  // namespace mlcl::cli

#endif  // MLCL_CONFIG_JSON_HPP_
