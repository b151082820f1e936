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


// Mini-batch training of the dual encoder with AdamW and the tempered
// weighted BCE loss, plus a grid sweep over the logit_scale initialization.

#ifndef MLCL_TRAINER_HPP_
#define MLCL_TRAINER_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlcl/matrix.hpp"
#include "mlcl/metrics.hpp"
#include "mlcl/model.hpp"

namespace mlcl::train {

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 60;
  double learning_rate = 1e-3;
  // Learning rate of logit_scale alone; unset uses learning_rate. Adam moves
  // a scalar by about one learning rate per step, so the encoder rate would
  // let the temperature drift far from its initialization within an epoch
  // or two; the default keeps it at fine-tuning speed.
  std::optional<double> logit_scale_learning_rate = 1e-5;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // One value for every class, or one per class.
  std::vector<double> pos_weight = {10.0};
  // Overrides ModelConfig::logit_scale_init when set.
  std::optional<double> logit_scale_init;
  bool logit_scale_frozen = false;
  // Seeds the batch order; model initialization uses ModelConfig::seed.
  std::uint64_t seed = 0;
  // GAP@K cut-offs evaluated on the validation split each epoch.
  std::vector<std::size_t> eval_ks = {10};

  void validate() const;
  std::vector<double> pos_weights(std::size_t classes) const;
};

struct OptimizerState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::uint64_t step = 0;

  static OptimizerState zeros_like(const model::DualEncoderModel& model);
};

// One AdamW step (decay first, w <- w * (1 - lr * wd), then the
// bias-corrected Adam update). Biases and gains are not decayed. An empty
// gradient matrix marks a frozen parameter, which is left untouched.
// logit_scale is clamped afterwards. Throws NumericError on a non-finite
// gradient before modifying anything.
void optimizer_step(model::DualEncoderModel& model, std::span<const Matrix> grads,
                    OptimizerState& state, const TrainConfig& config);

struct Split {
  Matrix features;
  BinaryMatrix truth;
};

struct TrainingData {
  Split train;
  Split val;  // may be empty; then the last epoch is kept
  std::vector<model::TokenizedText> label_texts;
};

struct EpochReport {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::optional<metrics::MetricReport> val;
  double logit_scale = 0.0;
};

struct TrainResult {
  // Best validation macro mAP over epochs (0 = the initial model).
  model::DualEncoderModel model;
  std::size_t best_epoch = 0;
  std::vector<EpochReport> history;
};

TrainResult train(const TrainingData& data, const model::ModelConfig& model_config,
                  const TrainConfig& config);

metrics::MetricReport evaluate_model(const model::DualEncoderModel& model,
                                     const Split& split,
                                     std::span<const model::TokenizedText> texts,
                                     std::span<const std::size_t> ks);

struct SweepRow {
  double logit_scale_init = 0.0;
  bool frozen = false;
  std::optional<double> macro_map;
  std::optional<double> gap_at_10;
  std::size_t best_epoch = 0;
  double final_logit_scale = 0.0;
  std::string error;  // non-empty when the run failed
};

// One full training run per grid value; metrics are those of the kept
// (best-validation) model on the validation split. A failing cell records
// its error and the sweep continues.
std::vector<SweepRow> temperature_sweep(std::span<const double> grid,
                                        const TrainingData& data,
                                        const model::ModelConfig& model_config,
                                        const TrainConfig& config);

std::string history_to_jsonl(const std::vector<EpochReport>& history,
                             std::span<const int> class_ids);
std::string sweep_to_csv(const std::vector<SweepRow>& rows);

}  // namespace mlcl::train

#endif  // MLCL_TRAINER_HPP_
