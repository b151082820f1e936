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

#include "mlcl/model.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

#include "mlcl/errors.hpp"
#include "mlcl/json_fields.hpp"
#include "mlcl/model_json.hpp"
#include "mlcl/random.hpp"
#include "mlcl/text_io.hpp"

namespace mlcl::model {
namespace {

constexpr const char* kCheckpointFormat = "mlcl-checkpoint-1";

std::string layer_name(const char* side, std::size_t k, const char* what) {
  return std::string(side) + ".layer" + std::to_string(k) + "." + what;
}

}  // namespace

void ModelConfig::validate() const {
  if (d_in == 0 || d_i == 0 || d_t == 0 || d_e == 0) {
    throw ConfigError("model: all dimensions must be >= 1");
  }
  if (vocab_size == 0) throw ConfigError("model: vocab_size must be >= 1");
  if (!(logit_scale_max >= 0.0) || !std::isfinite(logit_scale_max)) {
    throw ConfigError("model: logit_scale_max must be finite and >= 0");
  }
  if (!(logit_scale_init >= 0.0 && logit_scale_init <= logit_scale_max)) {
    throw ConfigError("model: logit_scale_init " +
                      std::to_string(logit_scale_init) +
                      " outside [0, logit_scale_max]");
  }
}

DualEncoderModel::DualEncoderModel(ModelConfig config,
                                   std::vector<Parameter> params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  const auto layout = parameter_layout(config_);
  if (layout.size() != params_.size()) {
    throw ConfigError("model: expected " + std::to_string(layout.size()) +
                      " parameters, got " + std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (params_[i].name != layout[i].name ||
        !params_[i].value.same_shape(layout[i].value)) {
      throw ConfigError("model: parameter " + std::to_string(i) +
                        " should be " + layout[i].name + " " +
                        std::to_string(layout[i].value.rows()) + "x" +
                        std::to_string(layout[i].value.cols()));
    }
    params_[i].kind = layout[i].kind;
  }
  logit_scale_index_ = index_of("logit_scale");
}

std::size_t DualEncoderModel::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  throw IndexError("model has no parameter '" + std::string(name) + "'");
}

const Parameter& DualEncoderModel::parameter(std::string_view name) const {
  return params_[index_of(name)];
}

Parameter& DualEncoderModel::parameter(std::string_view name) {
  return params_[index_of(name)];
}

std::size_t DualEncoderModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

bool operator==(const DualEncoderModel& a, const DualEncoderModel& b) {
  if (a.params_.size() != b.params_.size()) return false;
  for (std::size_t i = 0; i < a.params_.size(); ++i) {
    if (a.params_[i].name != b.params_[i].name ||
        !(a.params_[i].value == b.params_[i].value)) {
      return false;
    }
  }
  return true;
}

std::vector<Parameter> parameter_layout(const ModelConfig& c) {
  std::vector<Parameter> out;
  std::size_t width = c.d_in;
  for (std::size_t k = 0; k < c.n_layers_img; ++k) {
    out.push_back({layer_name("img", k, "weight"), ParamKind::kWeight,
                   Matrix(width, c.d_i)});
    out.push_back({layer_name("img", k, "bias"), ParamKind::kBias,
                   Matrix(1, c.d_i)});
    width = c.d_i;
  }
  out.push_back({"img.proj", ParamKind::kWeight, Matrix(width, c.d_e)});
  out.push_back({"txt.token_embedding", ParamKind::kWeight,
                 Matrix(c.vocab_size, c.d_t)});
  for (std::size_t k = 0; k < c.n_layers_txt; ++k) {
    out.push_back({layer_name("txt", k, "weight"), ParamKind::kWeight,
                   Matrix(c.d_t, c.d_t)});
    out.push_back({layer_name("txt", k, "bias"), ParamKind::kBias,
                   Matrix(1, c.d_t)});
  }
  out.push_back({"txt.proj", ParamKind::kWeight, Matrix(c.d_t, c.d_e)});
  out.push_back({"logit_scale", ParamKind::kGain, Matrix(1, 1)});
  return out;
}

DualEncoderModel init_model(const ModelConfig& config) {
  config.validate();
  auto params = parameter_layout(config);
  Rng rng(config.seed);
  for (auto& p : params) {
    if (p.kind != ParamKind::kWeight) continue;
    const double fan = static_cast<double>(p.value.rows() + p.value.cols());
    const double a = std::sqrt(6.0 / fan);
    for (double& v : p.value.data()) v = rng.uniform(-a, a);
  }
  DualEncoderModel model(config, std::move(params));
  model.set_logit_scale(config.logit_scale_init);
  return model;
}

void clamp_logit_scale(DualEncoderModel& model) {
  const double hi = model.config().logit_scale_max;
  model.set_logit_scale(std::clamp(model.logit_scale(), 0.0, hi));
}

// ---------------------------------------------------------------------------

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (char raw : text) {
    const auto ch = static_cast<unsigned char>(raw);
    if (std::isspace(ch) || std::ispunct(ch)) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
    } else {
      current += static_cast<char>(std::tolower(ch));
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens)
    : tokens_(std::move(tokens)) {
  if (tokens_.empty() || tokens_[0] != kUnknownToken) {
    throw ConfigError("vocabulary must start with <unk>");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], i).second) {
      throw ConfigError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

Vocabulary Vocabulary::build(std::span<const std::string> corpus) {
  std::vector<std::string> words;
  for (const auto& text : corpus) {
    for (auto& w : tokenize(text)) words.push_back(std::move(w));
  }
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  words.erase(std::remove(words.begin(), words.end(), kUnknownToken),
              words.end());
  words.insert(words.begin(), std::string(kUnknownToken));
  return Vocabulary(std::move(words));
}

std::optional<std::size_t> Vocabulary::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenizedText Vocabulary::encode(const std::string& text,
                                 OovPolicy policy) const {
  TokenizedText out;
  out.source = text;
  for (const auto& w : tokenize(text)) {
    if (auto id = find(w)) {
      out.ids.push_back(*id);
    } else if (policy == OovPolicy::kMapToUnknown) {
      out.ids.push_back(kUnknownId);
    }
  }
  if (out.ids.empty()) {
    throw ConfigError("label-text '" + text +
                      "' has no in-vocabulary tokens");
  }
  return out;
}

// ---------------------------------------------------------------------------

grad::NodeRef BoundModel::node(std::string_view name) const {
  return nodes[model->index_of(name)];
}

BoundModel bind(grad::Tape& tape, const DualEncoderModel& model,
                BindMode mode) {
  BoundModel bound;
  bound.model = &model;
  const auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const bool trainable =
        mode == BindMode::kTrainAll ||
        (mode == BindMode::kTrainFrozenScale && i != model.logit_scale_index());
    bound.nodes.push_back(trainable ? tape.parameter(params[i].value)
                                    : tape.constant(params[i].value));
  }
  return bound;
}

grad::NodeRef encode_images(grad::Tape& tape, const BoundModel& bound,
                            const Matrix& features) {
  const ModelConfig& c = bound.model->config();
  if (features.cols() != c.d_in) {
    throw DimensionError("encode_images: features have " +
                         std::to_string(features.cols()) + " columns, model expects " +
                         std::to_string(c.d_in));
  }
  if (!features.all_finite()) throw NumericError("encode_images: non-finite feature");
  grad::NodeRef h = tape.constant(features);
  for (std::size_t k = 0; k < c.n_layers_img; ++k) {
    h = tape.tanh_act(tape.affine(h, bound.node(layer_name("img", k, "weight")),
                                  bound.node(layer_name("img", k, "bias"))));
  }
  return tape.row_l2_normalize(tape.matmul(h, bound.node("img.proj")));
}

grad::NodeRef encode_texts(grad::Tape& tape, const BoundModel& bound,
                           std::span<const TokenizedText> texts) {
  const ModelConfig& c = bound.model->config();
  if (texts.empty()) throw ConfigError("encode_texts: no label-texts");
  std::vector<std::size_t> ids;
  std::vector<std::size_t> lengths;
  for (const auto& t : texts) {
    if (t.ids.empty()) {
      throw ConfigError("encode_texts: empty label-text '" + t.source + "'");
    }
    for (std::size_t id : t.ids) {
      if (id >= c.vocab_size) {
        throw IndexError("encode_texts: token id " + std::to_string(id) +
                         " >= vocab_size in '" + t.source + "'");
      }
    }
    ids.insert(ids.end(), t.ids.begin(), t.ids.end());
    lengths.push_back(t.ids.size());
  }
  grad::NodeRef tokens =
      tape.gather_rows(bound.node("txt.token_embedding"), std::move(ids));
  grad::NodeRef h = tape.mean_pool_rows(tokens, std::move(lengths));
  for (std::size_t k = 0; k < c.n_layers_txt; ++k) {
    h = tape.tanh_act(tape.affine(h, bound.node(layer_name("txt", k, "weight")),
                                  bound.node(layer_name("txt", k, "bias"))));
  }
  return tape.row_l2_normalize(tape.matmul(h, bound.node("txt.proj")));
}

SimilarityNodes similarity(grad::Tape& tape, const BoundModel& bound,
                           grad::NodeRef image_embeddings,
                           grad::NodeRef text_embeddings) {
  SimilarityNodes out;
  out.raw = tape.matmul_transposed(image_embeddings, text_embeddings);
  out.scaled = tape.scale_by_exp(out.raw, bound.logit_scale());
  return out;
}

Matrix encode_images(const DualEncoderModel& model, const Matrix& features) {
  grad::Tape tape;
  const BoundModel bound = bind(tape, model, BindMode::kInference);
  return tape.value(encode_images(tape, bound, features));
}

Matrix encode_texts(const DualEncoderModel& model,
                    std::span<const TokenizedText> texts) {
  grad::Tape tape;
  const BoundModel bound = bind(tape, model, BindMode::kInference);
  return tape.value(encode_texts(tape, bound, texts));
}

SimilarityLogits similarity(const DualEncoderModel& model,
                            const Matrix& image_embeddings,
                            const Matrix& text_embeddings) {
  if (image_embeddings.cols() != text_embeddings.cols()) {
    throw DimensionError("similarity: embedding widths differ");
  }
  SimilarityLogits out;
  out.raw = matmul_transposed(image_embeddings, text_embeddings);
  out.scaled = out.raw;
  out.scaled *= std::exp(model.logit_scale());
  return out;
}

// ---------------------------------------------------------------------------

nlohmann::ordered_json config_to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["d_in"] = c.d_in;
  j["d_i"] = c.d_i;
  j["d_t"] = c.d_t;
  j["d_e"] = c.d_e;
  j["vocab_size"] = c.vocab_size;
  j["n_layers_img"] = c.n_layers_img;
  j["n_layers_txt"] = c.n_layers_txt;
  j["logit_scale_init"] = c.logit_scale_init;
  j["logit_scale_max"] = c.logit_scale_max;
  j["seed"] = c.seed;
  return j;
}

ModelConfig config_from_json(const nlohmann::json& doc,
                             const ModelConfig& base) {
  ModelConfig c = base;
  io::JsonFields f(doc, "model");
  f.get("d_in", c.d_in);
  f.get("d_i", c.d_i);
  f.get("d_t", c.d_t);
  f.get("d_e", c.d_e);
  f.get("vocab_size", c.vocab_size);
  f.get("n_layers_img", c.n_layers_img);
  f.get("n_layers_txt", c.n_layers_txt);
  f.get("logit_scale_init", c.logit_scale_init);
  f.get("logit_scale_max", c.logit_scale_max);
  f.get("seed", c.seed);
  f.finish();
  return c;
}

std::string checkpoint_to_json(const DualEncoderModel& model,
                               const Vocabulary& vocab) {
  if (vocab.size() != model.config().vocab_size) {
    throw ConfigError("checkpoint: vocabulary size does not match model");
  }
  nlohmann::ordered_json doc;
  doc["format"] = kCheckpointFormat;
  doc["config"] = config_to_json(model.config());
  doc["vocab"] = vocab.tokens();
  nlohmann::ordered_json params = nlohmann::ordered_json::array();
  for (const auto& p : model.parameters()) {
    nlohmann::ordered_json entry;
    entry["name"] = p.name;
    entry["shape"] = {p.value.rows(), p.value.cols()};
    entry["data"] = p.value.values();
    params.push_back(std::move(entry));
  }
  doc["parameters"] = std::move(params);
  return doc.dump() + "\n";
}

Checkpoint checkpoint_from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
  io::JsonFields f(doc, "checkpoint");
  std::string format;
  f.require("format", format);
  if (format != kCheckpointFormat) {
    throw ConfigError("checkpoint: unsupported format '" + format + "'");
  }
  const ModelConfig config = config_from_json(f.raw("config"));
  std::vector<std::string> tokens;
  f.require("vocab", tokens);
  std::vector<Parameter> params;
  for (const auto& entry : f.raw("parameters")) {
    io::JsonFields pf(entry, "checkpoint.parameters");
    Parameter p;
    std::vector<std::size_t> shape;
    std::vector<double> data;
    pf.require("name", p.name);
    pf.require("shape", shape);
    pf.require("data", data);
    pf.finish();
    if (shape.size() != 2) throw ConfigError("checkpoint: shape must have 2 entries");
    p.value = Matrix(shape[0], shape[1], std::move(data));
    params.push_back(std::move(p));
  }
  f.finish();
  if (tokens.size() != config.vocab_size) {
    throw ConfigError("checkpoint: vocabulary has " +
                      std::to_string(tokens.size()) + " tokens, config says " +
                      std::to_string(config.vocab_size));
  }
  return Checkpoint{DualEncoderModel(config, std::move(params)),
                    Vocabulary(std::move(tokens))};
}

void save_checkpoint(const std::filesystem::path& path,
                     const DualEncoderModel& model, const Vocabulary& vocab) {
  io::write_file(path, checkpoint_to_json(model, vocab));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(io::read_file(path));
}

}  // namespace mlcl::model
