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


#include "mlcl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "mlcl/errors.hpp"
#include "mlcl/inference.hpp"
#include "mlcl/loss.hpp"
#include "mlcl/metrics_json.hpp"
#include "mlcl/random.hpp"
#include "mlcl/tape.hpp"
#include "mlcl/text_io.hpp"

namespace mlcl::train {
namespace {

std::vector<std::size_t> usable_ks(std::span<const std::size_t> ks,
                                   std::size_t classes) {
  std::vector<std::size_t> out;
  for (std::size_t k : ks) {
    const std::size_t c = std::min(k, classes);
    if (c >= 1 && std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  }
  return out;
}

std::string describe(double v) { return io::format_double(v); }

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("train: learning_rate must be > 0");
  }
  if (logit_scale_learning_rate &&
      (!(*logit_scale_learning_rate >= 0.0) || !std::isfinite(*logit_scale_learning_rate))) {
    throw ConfigError("train: logit_scale_learning_rate must be >= 0");
  }
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw ConfigError("train: weight_decay must be >= 0");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("train: betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("train: eps must be > 0");
  if (pos_weight.empty()) throw ConfigError("train: pos_weight must not be empty");
  for (double p : pos_weight) {
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw ConfigError("train: pos_weight entries must be finite and > 0");
    }
  }
  if (logit_scale_init && !std::isfinite(*logit_scale_init)) {
    throw ConfigError("train: logit_scale_init must be finite");
  }
}

std::vector<double> TrainConfig::pos_weights(std::size_t classes) const {
  if (pos_weight.size() == 1) return std::vector<double>(classes, pos_weight[0]);
  if (pos_weight.size() != classes) {
    throw ConfigError("train: pos_weight has " + std::to_string(pos_weight.size()) +
                      " entries for " + std::to_string(classes) + " classes");
  }
  return pos_weight;
}

OptimizerState OptimizerState::zeros_like(const model::DualEncoderModel& model) {
  OptimizerState s;
  for (const auto& p : model.parameters()) {
    s.m.emplace_back(p.value.rows(), p.value.cols());
    s.v.emplace_back(p.value.rows(), p.value.cols());
  }
  return s;
}

void optimizer_step(model::DualEncoderModel& model, std::span<const Matrix> grads,
                    OptimizerState& state, const TrainConfig& config) {
  auto params = model.parameters();
  if (grads.size() != params.size()) {
    throw DimensionError("optimizer_step: expected " + std::to_string(params.size()) +
                         " gradients, got " + std::to_string(grads.size()));
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("optimizer_step: optimizer state does not match model");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].size() == 0) continue;
    if (!grads[i].same_shape(params[i].value) || !state.m[i].same_shape(params[i].value) ||
        !state.v[i].same_shape(params[i].value)) {
      throw DimensionError("optimizer_step: shape mismatch for " + params[i].name);
    }
    if (!grads[i].all_finite()) {
      throw NumericError("optimizer_step: non-finite gradient for " + params[i].name);
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].size() == 0) continue;
    const double lr = i == model.logit_scale_index() && config.logit_scale_learning_rate
                          ? *config.logit_scale_learning_rate
                          : config.learning_rate;
    Matrix& w = params[i].value;
    if (params[i].kind == model::ParamKind::kWeight) {
      w *= 1.0 - lr * config.weight_decay;
    }
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    auto g = grads[i].data();
    auto x = w.data();
    for (std::size_t k = 0; k < x.size(); ++k) {
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g[k];
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g[k] * g[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      x[k] -= lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
  model::clamp_logit_scale(model);
}

metrics::MetricReport evaluate_model(const model::DualEncoderModel& model,
                                     const Split& split,
                                     std::span<const model::TokenizedText> texts,
                                     std::span<const std::size_t> ks) {
  metrics::ScoredPredictions preds;
  preds.scores = infer::predict(model, split.features, texts);
  preds.truth = split.truth;
  const auto k = usable_ks(ks, texts.size());
  return metrics::evaluate(preds, k);
}

TrainResult train(const TrainingData& data, const model::ModelConfig& model_config,
                  const TrainConfig& config) {
  config.validate();
  const std::size_t n = data.train.features.rows();
  const std::size_t classes = data.label_texts.size();
  if (n == 0) throw ConfigError("train: empty training split");
  if (data.train.truth.rows() != n || data.train.truth.cols() != classes) {
    throw DimensionError("train: training truth must be n x classes");
  }
  const bool has_val = data.val.features.rows() > 0;
  if (has_val && (data.val.truth.rows() != data.val.features.rows() ||
                  data.val.truth.cols() != classes)) {
    throw DimensionError("train: validation truth must be n_val x classes");
  }
  const std::vector<double> pos_weights = config.pos_weights(classes);

  model::ModelConfig mc = model_config;
  if (config.logit_scale_init) mc.logit_scale_init = *config.logit_scale_init;
  model::DualEncoderModel current = model::init_model(mc);
  OptimizerState state = OptimizerState::zeros_like(current);
  const model::BindMode mode = config.logit_scale_frozen
                                   ? model::BindMode::kTrainFrozenScale
                                   : model::BindMode::kTrainAll;

  TrainResult result{current, 0, {}};
  double best = -1.0;
  if (has_val) {
    best = evaluate_model(current, data.val, data.label_texts, config.eval_ks).macro_map;
  }

  Rng rng(config.seed);
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(n, start + config.batch_size);
      const std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(end));
      const Matrix features = data.train.features.select_rows(rows);
      const Matrix targets = data.train.truth.select_rows(rows).to_matrix();

      grad::Tape tape;
      const model::BoundModel bound = model::bind(tape, current, mode);
      const grad::NodeRef img = model::encode_images(tape, bound, features);
      const grad::NodeRef txt = model::encode_texts(tape, bound, data.label_texts);
      const model::SimilarityNodes sim = model::similarity(tape, bound, img, txt);
      const grad::NodeRef loss =
          loss::tempered_bce(tape, sim.raw, bound.logit_scale(), targets, pos_weights);
      const double value = tape.value(loss).item();
      if (!std::isfinite(value)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batch_index) +
                           ", logit_scale " + describe(current.logit_scale()));
      }
      const grad::GradientMap grads = tape.backward(loss);
      std::vector<Matrix> g(bound.nodes.size());
      for (std::size_t i = 0; i < bound.nodes.size(); ++i) {
        if (grads.contains(bound.nodes[i])) g[i] = grads.at(bound.nodes[i]);
      }
      try {
        optimizer_step(current, g, state, config);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batch_index) + ", logit_scale " +
                           describe(current.logit_scale()) + ")");
      }
      loss_sum += value * static_cast<double>(end - start);
    }

    EpochReport report;
    report.epoch = epoch;
    report.train_loss = loss_sum / static_cast<double>(n);
    report.logit_scale = current.logit_scale();
    if (has_val) {
      report.val = evaluate_model(current, data.val, data.label_texts, config.eval_ks);
      if (report.val->macro_map > best) {
        best = report.val->macro_map;
        result.model = current;
        result.best_epoch = epoch;
      }
    } else {
      result.model = current;
      result.best_epoch = epoch;
    }
    result.history.push_back(std::move(report));
  }
  return result;
}

std::vector<SweepRow> temperature_sweep(std::span<const double> grid,
                                        const TrainingData& data,
                                        const model::ModelConfig& model_config,
                                        const TrainConfig& config) {
  if (grid.empty()) throw ConfigError("sweep: empty logit_scale grid");
  std::vector<SweepRow> rows;
  for (double init : grid) {
    SweepRow row;
    row.logit_scale_init = init;
    row.frozen = config.logit_scale_frozen;
    try {
      TrainConfig c = config;
      c.logit_scale_init = init;
      const TrainResult r = train(data, model_config, c);
      row.best_epoch = r.best_epoch;
      row.final_logit_scale = r.model.logit_scale();
      if (data.val.features.rows() > 0) {
        const std::size_t k10[] = {10};
        const auto report = evaluate_model(r.model, data.val, data.label_texts, k10);
        row.macro_map = report.macro_map;
        row.gap_at_10 = report.gap_at_k.begin()->second;
      }
    } catch (const Error& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string history_to_jsonl(const std::vector<EpochReport>& history,
                             std::span<const int> class_ids) {
  std::string out;
  for (const auto& e : history) {
    nlohmann::ordered_json j;
    j["epoch"] = e.epoch;
    j["train_loss"] = e.train_loss;
    j["logit_scale"] = e.logit_scale;
    j["val"] = e.val ? metrics::report_json(*e.val, class_ids)
                     : nlohmann::ordered_json(nullptr);
    out += j.dump() + "\n";
  }
  return out;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  auto opt = [](const std::optional<double>& v) {
    return v ? io::format_double(*v) : std::string();
  };
  std::string out =
      "logit_scale_init,frozen,macro_map,gap_at_10,best_epoch,final_logit_scale,error\n";
  for (const auto& r : rows) {
    out += io::join_csv_record({io::format_double(r.logit_scale_init),
                                r.frozen ? "true" : "false", opt(r.macro_map),
                                opt(r.gap_at_10), std::to_string(r.best_epoch),
                                io::format_double(r.final_logit_scale), r.error}) +
           "\n";
  }
  return out;
}

}  // namespace mlcl::train
