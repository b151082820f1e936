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


#include "mlcl/inference.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "json.hpp"
#include "mlcl/errors.hpp"
#include "mlcl/loss.hpp"
#include "mlcl/text_io.hpp"

namespace mlcl::infer {
namespace {

Matrix sigmoid_of(const Matrix& scaled) {
  Matrix p = scaled;
  for (double& v : p.data()) v = loss::sigmoid(v);
  return p;
}

void check_scores(const Matrix& scores, const BinaryMatrix& truth) {
  if (scores.rows() != truth.rows() || scores.cols() != truth.cols()) {
    throw DimensionError("thresholds: scores and truth shapes differ");
  }
  if (!scores.all_finite()) throw NumericError("thresholds: non-finite score");
}

std::vector<model::TokenizedText> encode_prompts(
    const model::Vocabulary& vocab, std::span<const std::string> prompts) {
  if (prompts.empty()) throw ConfigError("no prompts given");
  std::vector<model::TokenizedText> texts;
  for (const auto& p : prompts) {
    texts.push_back(vocab.encode(p, model::OovPolicy::kSkip));
  }
  return texts;
}

// Fills recall and drop fraction of every class, then the totals.
void measure(ThresholdTable& table, const Matrix& scores,
             const BinaryMatrix& truth) {
  const std::size_t n = scores.rows();
  std::size_t kept_pos = 0;
  std::size_t all_pos = 0;
  std::size_t dropped = 0;
  for (std::size_t c = 0; c < scores.cols(); ++c) {
    ClassThreshold& t = table.per_class[c];
    std::size_t pos = 0;
    std::size_t kept = 0;
    std::size_t drop = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool keep = !t.threshold || scores(i, c) >= *t.threshold;
      if (truth(i, c)) {
        ++pos;
        if (keep) ++kept;
      }
      if (!keep) ++drop;
    }
    t.positives = pos;
    t.recall = pos == 0 ? 1.0 : static_cast<double>(kept) / static_cast<double>(pos);
    t.drop_fraction = n == 0 ? 0.0 : static_cast<double>(drop) / static_cast<double>(n);
    kept_pos += kept;
    all_pos += pos;
    dropped += drop;
  }
  const std::size_t total = n * scores.cols();
  table.recall = all_pos == 0 ? 1.0
                              : static_cast<double>(kept_pos) /
                                    static_cast<double>(all_pos);
  table.drop_fraction =
      total == 0 ? 0.0 : static_cast<double>(dropped) / static_cast<double>(total);
}

}  // namespace

Matrix predict(const model::DualEncoderModel& model, const Matrix& features,
               std::span<const model::TokenizedText> texts) {
  const Matrix img = model::encode_images(model, features);
  const Matrix txt = model::encode_texts(model, texts);
  return sigmoid_of(model::similarity(model, img, txt).scaled);
}

Matrix zero_shot(const model::DualEncoderModel& model,
                 const model::Vocabulary& vocab, const Matrix& features,
                 std::span<const std::string> prompts) {
  const auto texts = encode_prompts(vocab, prompts);
  return predict(model, features, texts);
}

double pair_softmax_second(double a, double b) { return loss::sigmoid(b - a); }

Matrix clip_pair_baseline(const model::DualEncoderModel& model,
                          const model::Vocabulary& vocab,
                          const Matrix& features,
                          std::span<const std::string> class_names) {
  if (class_names.empty()) throw ConfigError("clip_pair_baseline: no class names");
  std::vector<std::string> prompts = {"a photo"};
  for (const auto& name : class_names) prompts.push_back("a photo of " + name);
  const auto texts = encode_prompts(vocab, prompts);
  const Matrix img = model::encode_images(model, features);
  const Matrix txt = model::encode_texts(model, texts);
  const Matrix logits = model::similarity(model, img, txt).scaled;
  Matrix out(features.rows(), class_names.size());
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t c = 0; c < out.cols(); ++c) {
      out(i, c) = pair_softmax_second(logits(i, 0), logits(i, c + 1));
    }
  }
  return out;
}

ThresholdTable select_thresholds(const Matrix& scores, const BinaryMatrix& truth,
                                 std::span<const double> target_recall) {
  check_scores(scores, truth);
  if (target_recall.size() != scores.cols()) {
    throw DimensionError("select_thresholds: need one target recall per class");
  }
  ThresholdTable table;
  table.per_class.resize(scores.cols());
  for (std::size_t c = 0; c < scores.cols(); ++c) {
    const double target = target_recall[c];
    if (!(target > 0.0 && target <= 1.0)) {
      throw ConfigError("select_thresholds: target recall must lie in (0, 1]");
    }
    std::vector<double> pos;
    for (std::size_t i = 0; i < scores.rows(); ++i) {
      if (truth(i, c)) pos.push_back(scores(i, c));
    }
    if (pos.empty()) continue;
    std::sort(pos.begin(), pos.end(), std::greater<>());
    const double need = std::ceil(target * static_cast<double>(pos.size()) - 1e-9);
    const std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(need), 1,
                                                  pos.size());
    table.per_class[c].threshold = pos[k - 1];
  }
  measure(table, scores, truth);
  return table;
}

ThresholdTable select_thresholds(const Matrix& scores, const BinaryMatrix& truth,
                                 double target_recall) {
  const std::vector<double> targets(scores.cols(), target_recall);
  return select_thresholds(scores, truth, targets);
}

ThresholdTable apply_thresholds(const ThresholdTable& table, const Matrix& scores,
                                const BinaryMatrix& truth) {
  check_scores(scores, truth);
  if (table.per_class.size() != scores.cols()) {
    throw DimensionError("apply_thresholds: table has " +
                         std::to_string(table.per_class.size()) + " classes, scores have " +
                         std::to_string(scores.cols()));
  }
  ThresholdTable out = table;
  measure(out, scores, truth);
  return out;
}

std::string thresholds_to_csv(const ThresholdTable& table,
                              std::span<const int> class_ids) {
  if (class_ids.size() != table.per_class.size()) {
    throw DimensionError("thresholds_to_csv: class id count mismatch");
  }
  std::string out = "class_id,threshold,recall,drop_fraction\n";
  for (std::size_t c = 0; c < class_ids.size(); ++c) {
    const ClassThreshold& t = table.per_class[c];
    out += std::to_string(class_ids[c]) + "," +
           (t.threshold ? io::format_double(*t.threshold) : "") + "," +
           io::format_double(t.recall) + "," + io::format_double(t.drop_fraction) +
           "\n";
  }
  return out;
}

ThresholdTable thresholds_from_csv(const std::string& text,
                                   std::span<const int> class_ids,
                                   const std::string& source) {
  const auto lines = io::split_lines(text);
  if (lines.empty() || lines[0] != "class_id,threshold,recall,drop_fraction") {
    throw ParseError(source, 1, "unexpected header");
  }
  ThresholdTable table;
  table.per_class.resize(class_ids.size());
  std::vector<bool> seen(class_ids.size(), false);
  for (std::size_t n = 1; n < lines.size(); ++n) {
    if (lines[n].empty()) continue;
    try {
      const auto f = io::split_csv_record(lines[n]);
      if (f.size() != 4) throw Error("expected 4 fields");
      const long long id = io::parse_int(f[0]);
      auto it = std::find(class_ids.begin(), class_ids.end(), id);
      if (it == class_ids.end()) throw Error("unknown class id " + f[0]);
      const std::size_t c = static_cast<std::size_t>(it - class_ids.begin());
      if (seen[c]) throw Error("duplicate class id " + f[0]);
      seen[c] = true;
      ClassThreshold& t = table.per_class[c];
      if (!f[1].empty()) t.threshold = io::parse_double(f[1]);
      t.recall = io::parse_double(f[2]);
      t.drop_fraction = io::parse_double(f[3]);
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(source, n + 1, e.what());
    }
  }
  return table;
}

std::string predictions_to_jsonl(const std::vector<std::string>& image_ids,
                                 const Matrix& scores,
                                 std::span<const int> class_ids,
                                 const ThresholdTable* table) {
  if (image_ids.size() != scores.rows() || class_ids.size() != scores.cols()) {
    throw DimensionError("predictions_to_jsonl: shape mismatch");
  }
  if (table && table->per_class.size() != scores.cols()) {
    throw DimensionError("predictions_to_jsonl: threshold table mismatch");
  }
  std::string out;
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    nlohmann::ordered_json j;
    j["image_id"] = image_ids[i];
    nlohmann::ordered_json s = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < scores.cols(); ++c) {
      if (table) {
        const auto& t = table->per_class[c].threshold;
        if (t && scores(i, c) < *t) continue;
      }
      s[std::to_string(class_ids[c])] = scores(i, c);
    }
    j["scores"] = std::move(s);
    out += j.dump() + "\n";
  }
  return out;
}

std::string embeddings_to_csv(const std::vector<std::string>& image_ids,
                              const Matrix& embeddings) {
  if (image_ids.size() != embeddings.rows()) {
    throw DimensionError("embeddings_to_csv: id count does not match rows");
  }
  std::string out = "image_id";
  for (std::size_t d = 0; d < embeddings.cols(); ++d) out += ",e" + std::to_string(d);
  out += '\n';
  for (std::size_t i = 0; i < embeddings.rows(); ++i) {
    out += io::csv_field(image_ids[i]);
    for (double v : embeddings.row(i)) out += "," + io::format_double(v);
    out += '\n';
  }
  return out;
}

void export_embeddings(const std::filesystem::path& path,
                       const model::DualEncoderModel& model,
                       const std::vector<std::string>& image_ids,
                       const Matrix& features) {
  io::write_file(path,
                 embeddings_to_csv(image_ids, model::encode_images(model, features)));
}

std::string logit_histogram_csv(const Matrix& scaled_logits,
                                const BinaryMatrix& truth, double logit_scale,
                                std::size_t bins) {
  if (scaled_logits.rows() != truth.rows() || scaled_logits.cols() != truth.cols()) {
    throw DimensionError("logit_histogram_csv: shape mismatch");
  }
  if (bins == 0) throw ConfigError("logit_histogram_csv: bins must be >= 1");
  const double hi = std::exp(logit_scale);
  const double width = 2.0 * hi / static_cast<double>(bins);
  std::vector<std::size_t> pos(bins, 0), neg(bins, 0);
  for (std::size_t i = 0; i < truth.rows(); ++i) {
    for (std::size_t c = 0; c < truth.cols(); ++c) {
      const double v = (scaled_logits(i, c) + hi) / width;
      const std::size_t b =
          std::min(bins - 1, static_cast<std::size_t>(std::max(0.0, std::floor(v))));
      ++(truth(i, c) ? pos : neg)[b];
    }
  }
  std::string out = "bin_lo,bin_hi,positives,negatives\n";
  for (std::size_t b = 0; b < bins; ++b) {
    const double lo = -hi + width * static_cast<double>(b);
    out += io::format_double(lo) + "," + io::format_double(lo + width) + "," +
           std::to_string(pos[b]) + "," + std::to_string(neg[b]) + "\n";
  }
  return out;
}

}  // namespace mlcl::infer
