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

// Dual-encoder image/label-text model.
//
//   image features [n, d_in] -> (affine + tanh) x n_layers_img -> I_f [n, d_i]
//   I_e = l2_normalize(I_f * W_i)                                  [n, d_e]
//
//   label-text tokens -> token embedding -> mean pool per text    [n_c, d_t]
//                     -> (affine + tanh) x n_layers_txt -> T_f    [n_c, d_t]
//   T_e = l2_normalize(T_f * W_t)                                  [n_c, d_e]
//
//   raw    = I_e * T_e^T            cosine similarities in [-1, 1]
//   scaled = raw * exp(logit_scale)
//
// The projections W_i and W_t carry no bias. With n_layers_img == 0 the image
// side is the bare projection and W_i has d_in rows.

#ifndef MLCL_MODEL_HPP_
#define MLCL_MODEL_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mlcl/matrix.hpp"
#include "mlcl/tape.hpp"

namespace mlcl::model {

// ln(100): temperature floor of 0.01.
inline const double kDefaultLogitScaleMax = std::log(100.0);
inline constexpr double kDefaultLogitScaleInit = 3.652;

struct ModelConfig {
  std::size_t d_in = 32;
  std::size_t d_i = 32;
  std::size_t d_t = 32;
  std::size_t d_e = 16;
  std::size_t vocab_size = 0;
  std::size_t n_layers_img = 2;
  std::size_t n_layers_txt = 2;
  double logit_scale_init = kDefaultLogitScaleInit;
  double logit_scale_max = kDefaultLogitScaleMax;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
};

// Weights are decayed by the optimizer; biases and gains are not.
enum class ParamKind { kWeight, kBias, kGain };

struct Parameter {
  std::string name;
  ParamKind kind = ParamKind::kWeight;
  Matrix value;
};

class DualEncoderModel {
 public:
  DualEncoderModel(ModelConfig config, std::vector<Parameter> params);

  const ModelConfig& config() const { return config_; }
  std::span<Parameter> parameters() { return params_; }
  std::span<const Parameter> parameters() const { return params_; }

  const Parameter& parameter(std::string_view name) const;
  Parameter& parameter(std::string_view name);
  std::size_t index_of(std::string_view name) const;

  double logit_scale() const { return params_[logit_scale_index_].value[0]; }
  void set_logit_scale(double v) { params_[logit_scale_index_].value[0] = v; }
  std::size_t logit_scale_index() const { return logit_scale_index_; }

  // Total number of scalar parameters.
  std::size_t parameter_count() const;

  friend bool operator==(const DualEncoderModel& a, const DualEncoderModel& b);

 private:
  ModelConfig config_;
  std::vector<Parameter> params_;
  std::size_t logit_scale_index_ = 0;
};

// Names and shapes of every parameter for a config, in storage order.
std::vector<Parameter> parameter_layout(const ModelConfig& config);

// Deterministic for a fixed config.seed. Weights ~ U(-a, a) with
// a = sqrt(6 / (fan_in + fan_out)); biases zero; logit_scale = init.
DualEncoderModel init_model(const ModelConfig& config);

// Clamps logit_scale into [0, logit_scale_max].
void clamp_logit_scale(DualEncoderModel& model);

// ---------------------------------------------------------------------------
// Tokenization.

struct TokenizedText {
  std::vector<std::size_t> ids;
  std::string source;
};

// Lowercases and splits on whitespace and ASCII punctuation.
std::vector<std::string> tokenize(std::string_view text);

enum class OovPolicy {
  kMapToUnknown,  // out-of-vocabulary words become the <unk> id
  kSkip,          // out-of-vocabulary words are dropped
};

class Vocabulary {
 public:
  static constexpr std::size_t kUnknownId = 0;
  static constexpr std::string_view kUnknownToken = "<unk>";

  // tokens[0] must be "<unk>"; tokens must be unique.
  explicit Vocabulary(std::vector<std::string> tokens);

  // <unk> followed by the distinct words of the corpus in sorted order.
  static Vocabulary build(std::span<const std::string> corpus);

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::optional<std::size_t> find(std::string_view word) const;

  // Throws ConfigError when the result would be empty (empty text, or only
  // out-of-vocabulary words under kSkip); the message names the text.
  TokenizedText encode(const std::string& text,
                       OovPolicy policy = OovPolicy::kMapToUnknown) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Forward pass on a tape.

enum class BindMode {
  kInference,         // every parameter enters as a constant
  kTrainAll,          // every parameter is trainable
  kTrainFrozenScale,  // all but logit_scale
};

// Tape nodes for a model's parameters, parallel to model.parameters().
struct BoundModel {
  const DualEncoderModel* model = nullptr;
  std::vector<grad::NodeRef> nodes;

  grad::NodeRef node(std::string_view name) const;
  grad::NodeRef logit_scale() const {
    return nodes[model->logit_scale_index()];
  }
};

BoundModel bind(grad::Tape& tape, const DualEncoderModel& model, BindMode mode);

// Row-normalized image embeddings I_e.
grad::NodeRef encode_images(grad::Tape& tape, const BoundModel& bound,
                            const Matrix& features);
// Row-normalized label-text embeddings T_e, one row per text.
grad::NodeRef encode_texts(grad::Tape& tape, const BoundModel& bound,
                           std::span<const TokenizedText> texts);

struct SimilarityNodes {
  grad::NodeRef raw;
  grad::NodeRef scaled;
};
SimilarityNodes similarity(grad::Tape& tape, const BoundModel& bound,
                           grad::NodeRef image_embeddings,
                           grad::NodeRef text_embeddings);

// ---------------------------------------------------------------------------
// Plain-value forward pass.

Matrix encode_images(const DualEncoderModel& model, const Matrix& features);
Matrix encode_texts(const DualEncoderModel& model,
                    std::span<const TokenizedText> texts);

struct SimilarityLogits {
  Matrix raw;     // x_ij in [-1, 1]
  Matrix scaled;  // raw * exp(logit_scale)
};
SimilarityLogits similarity(const DualEncoderModel& model,
                            const Matrix& image_embeddings,
                            const Matrix& text_embeddings);

// ---------------------------------------------------------------------------
// Checkpoints: one JSON document holding config, vocabulary and parameters.

struct Checkpoint {
  DualEncoderModel model;
  Vocabulary vocab;
};

std::string checkpoint_to_json(const DualEncoderModel& model,
                               const Vocabulary& vocab);
Checkpoint checkpoint_from_json(std::string_view text);
void save_checkpoint(const std::filesystem::path& path,
                     const DualEncoderModel& model, const Vocabulary& vocab);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mlcl::model

#endif  // MLCL_MODEL_HPP_
