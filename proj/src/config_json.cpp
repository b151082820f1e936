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


#include "mlcl/config_json.hpp"

#include "mlcl/json_fields.hpp"

namespace mlcl::cli {

data::SplitSpec split_spec_from_json(const nlohmann::json& doc,
                                     const data::SplitSpec& base) {
  data::SplitSpec s = base;
  io::JsonFields f(doc, "split");
  f.get("train", s.train);
  f.get("val", s.val);
  f.get("test", s.test);
  f.get("seed", s.seed);
  f.finish();
  s.validate();
  return s;
}

data::SynthConfig synth_config_from_json(const nlohmann::json& doc,
                                         const data::SynthConfig& base) {
  data::SynthConfig c = base;
  io::JsonFields f(doc, "synth");
  f.get("n", c.n);
  f.get("n_classes", c.n_classes);
  f.get("d_in", c.d_in);
  f.get("hierarchy_depth", c.hierarchy_depth);
  f.get("label_frequencies", c.label_frequencies);
  f.get("freq_min", c.freq_min);
  f.get("freq_max", c.freq_max);
  f.get("signal", c.signal);
  f.get("noise_std", c.noise_std);
  f.get("confusion", c.confusion);
  f.get("flip_noise_rate", c.flip_noise_rate);
  f.get("compositional_holdout", c.compositional_holdout);
  f.get("seed", c.seed);
  if (f.has("split")) c.split = split_spec_from_json(f.raw("split"), c.split);
  f.finish();
  c.validate();
  return c;
}

train::TrainConfig train_config_from_json(const nlohmann::json& doc,
                                          const train::TrainConfig& base) {
  train::TrainConfig c = base;
  io::JsonFields f(doc, "train");
  f.get("batch_size", c.batch_size);
  f.get("epochs", c.epochs);
  f.get("learning_rate", c.learning_rate);
  if (f.has("logit_scale_learning_rate")) {
    const auto& v = f.raw("logit_scale_learning_rate");
    if (v.is_null()) {
      c.logit_scale_learning_rate.reset();
    } else {
      double lr = 0.0;
      f.get("logit_scale_learning_rate", lr);
      c.logit_scale_learning_rate = lr;
    }
  }
  f.get("weight_decay", c.weight_decay);
  f.get("beta1", c.beta1);
  f.get("beta2", c.beta2);
  f.get("eps", c.eps);
  if (f.has("pos_weight")) {
    const auto& v = f.raw("pos_weight");
    if (v.is_number()) {
      double p = 0.0;
      f.get("pos_weight", p);
      c.pos_weight = {p};
    } else {
      f.get("pos_weight", c.pos_weight);
    }
  }
  if (f.has("logit_scale_init")) {
    if (f.raw("logit_scale_init").is_null()) {
      c.logit_scale_init.reset();
    } else {
      double s = 0.0;
      f.get("logit_scale_init", s);
      c.logit_scale_init = s;
    }
  }
  f.get("logit_scale_frozen", c.logit_scale_frozen);
  f.get("seed", c.seed);
  f.get("eval_ks", c.eval_ks);
  f.finish();
  c.validate();
  return c;
}

nlohmann::ordered_json train_config_to_json(const train::TrainConfig& c) {
  nlohmann::ordered_json j;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["learning_rate"] = c.learning_rate;
  j["logit_scale_learning_rate"] =
      c.logit_scale_learning_rate ? nlohmann::ordered_json(*c.logit_scale_learning_rate)
                                  : nlohmann::ordered_json(nullptr);
  j["weight_decay"] = c.weight_decay;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["eps"] = c.eps;
  j["pos_weight"] = c.pos_weight;
  j["logit_scale_init"] = c.logit_scale_init ? nlohmann::ordered_json(*c.logit_scale_init)
                                             : nlohmann::ordered_json(nullptr);
  j["logit_scale_frozen"] = c.logit_scale_frozen;
  j["seed"] = c.seed;
  j["eval_ks"] = c.eval_ks;
  return j;
}

}  // namespace mlcl::cli
