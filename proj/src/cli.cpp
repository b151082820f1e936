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


#include "mlcl/cli.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mlcl/config_json.hpp"
#include "mlcl/data.hpp"
#include "mlcl/dataset_io.hpp"
#include "mlcl/errors.hpp"
#include "mlcl/inference.hpp"
#include "mlcl/json_fields.hpp"
#include "mlcl/metrics.hpp"
#include "mlcl/model.hpp"
#include "mlcl/model_json.hpp"
#include "mlcl/synth.hpp"
#include "mlcl/text_io.hpp"
#include "mlcl/trainer.hpp"

namespace mlcl::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

const std::vector<double> kDefaultGrid = {0.7, 2.0, 3.652, 4.6};

// Parsed run config plus the bookkeeping every command shares.
class RunConfig {
 public:
  RunConfig(json doc, std::string command)
      : doc_(std::move(doc)), fields_(doc_, command) {}

  io::JsonFields& fields() { return fields_; }

  fs::path input_file(const std::string& key) {
    std::string p;
    fields_.require(key, p);
    if (!fs::is_regular_file(p)) throw IoError(key + ": no such file '" + p + "'");
    return p;
  }
  std::optional<fs::path> optional_input_file(const std::string& key) {
    if (!fields_.has(key)) return std::nullopt;
    return input_file(key);
  }
  fs::path input_dir(const std::string& key, const std::vector<std::string>& files) {
    std::string p;
    fields_.require(key, p);
    for (const auto& f : files) {
      if (!fs::is_regular_file(fs::path(p) / f)) {
        throw IoError(key + ": missing '" + (fs::path(p) / f).string() + "'");
      }
    }
    return p;
  }
  fs::path output_dir() {
    std::string p;
    fields_.require("out", p);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec || !fs::is_directory(p)) throw IoError("out: cannot create directory '" + p + "'");
    return p;
  }
  std::optional<std::uint64_t> seed() {
    if (!fields_.has("seed")) return std::nullopt;
    std::uint64_t s = 0;
    fields_.get("seed", s);
    return s;
  }
  const json* section(const std::string& key) {
    return fields_.has(key) ? &fields_.raw(key) : nullptr;
  }

 private:
  json doc_;
  io::JsonFields fields_;
};

const std::vector<std::string> kDatasetFiles = {"labels.csv", "features.csv",
                                                "ground_truth.jsonl"};

void write(const fs::path& dir, const std::string& name, const std::string& content,
           std::ostream& out) {
  io::write_file(dir / name, content);
  out << "wrote " << (dir / name).string() << "\n";
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  return rows;
}

std::vector<model::TokenizedText> label_texts(const model::Vocabulary& vocab,
                                              const data::LabelSet& labels) {
  std::vector<model::TokenizedText> out;
  for (const auto& text : labels.label_texts()) out.push_back(vocab.encode(text));
  return out;
}

train::Split make_split(const data::ConsolidatedDataset& d,
                        const std::vector<std::size_t>& rows) {
  return {d.features.select_rows(rows), d.truth.select_rows(rows)};
}

const std::vector<std::size_t>& split_part(const data::SplitAssignment& split,
                                           const std::string& part) {
  if (part == "train") return split.train;
  if (part == "val") return split.val;
  if (part == "test") return split.test;
  throw ConfigError("part must be one of train, val, test, all (got '" + part + "')");
}

// Shared by train and sweep.
struct TrainingSetup {
  data::ConsolidatedDataset dataset;
  model::Vocabulary vocab{{"<unk>"}};
  train::TrainingData data;
  model::ModelConfig model_config;
  train::TrainConfig train_config;
};

TrainingSetup load_training(RunConfig& rc) {
  const fs::path dir = rc.input_dir("dataset", kDatasetFiles);
  const fs::path splits = rc.input_file("splits");
  const auto seed = rc.seed();
  const json* model_doc = rc.section("model");
  const json* train_doc = rc.section("train");

  TrainingSetup s;
  s.dataset = data::read_dataset(dir);
  const auto split = data::split_from_json(io::read_file(splits), s.dataset.image_ids);
  s.vocab = model::Vocabulary::build(s.dataset.labels.label_texts());
  s.data.label_texts = label_texts(s.vocab, s.dataset.labels);
  s.data.train = make_split(s.dataset, split.train);
  s.data.val = make_split(s.dataset, split.val);

  model::ModelConfig base;
  base.d_in = s.dataset.features.cols();
  base.vocab_size = s.vocab.size();
  s.model_config = model_doc ? model::config_from_json(*model_doc, base) : base;
  if (s.model_config.d_in != base.d_in || s.model_config.vocab_size != base.vocab_size) {
    throw ConfigError("model: d_in and vocab_size are fixed by the dataset (" +
                      std::to_string(base.d_in) + ", " + std::to_string(base.vocab_size) +
                      ")");
  }
  s.train_config = train_doc ? train_config_from_json(*train_doc) : train::TrainConfig{};
  if (seed) {
    s.model_config.seed = *seed;
    s.train_config.seed = *seed;
  }
  s.model_config.validate();
  return s;
}

std::vector<int> class_ids(const data::LabelSet& labels) { return labels.class_ids(); }

// ---------------------------------------------------------------------------

void cmd_synth(RunConfig& rc, std::ostream& out) {
  const json* synth_doc = rc.section("synth");
  const auto seed = rc.seed();
  const fs::path dir = rc.output_dir();
  rc.fields().finish();

  data::SynthConfig cfg = synth_doc ? synth_config_from_json(*synth_doc) : data::SynthConfig{};
  if (seed) {
    cfg.seed = *seed;
    cfg.split.seed = *seed;
  }
  const data::SynthDataset s = data::synth_generate(cfg);
  const data::ConsolidatedDataset& d = s.dataset;
  write(dir, "labels.csv", data::labels_to_csv(d.labels), out);
  write(dir, "annotations.jsonl", data::annotations_to_jsonl(s.records), out);
  write(dir, "features.csv", data::features_to_csv(d.image_ids, d.features), out);
  write(dir, "ground_truth.jsonl",
        data::ground_truth_to_jsonl(d.image_ids, d.truth, d.labels), out);
  write(dir, "clean_ground_truth.jsonl",
        data::ground_truth_to_jsonl(d.image_ids, s.clean_truth, d.labels), out);
  write(dir, "splits.json", data::split_to_json(s.split, d.image_ids, cfg.split), out);
  if (s.holdout) {
    ordered_json h;
    h["prompt"] = s.holdout->prompt;
    h["first_class_id"] = d.labels[s.holdout->first_column].class_id;
    h["second_class_id"] = d.labels[s.holdout->second_column].class_id;
    std::vector<std::string> positives;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (s.holdout->truth[i]) positives.push_back(d.image_ids[i]);
    }
    h["positive_image_ids"] = positives;
    write(dir, "holdout.json", h.dump(1) + "\n", out);
  }
}

void cmd_consolidate(RunConfig& rc, std::ostream& out) {
  const fs::path labels_path = rc.input_file("labels");
  const fs::path annotations_path = rc.input_file("annotations");
  const fs::path features_path = rc.input_file("features");
  const fs::path dir = rc.output_dir();
  rc.fields().finish();

  data::ConsolidatedDataset d;
  d.labels = data::labels_from_csv(io::read_file(labels_path), labels_path.string());
  const auto records = data::annotations_from_jsonl(io::read_file(annotations_path),
                                                    annotations_path.string());
  data::FeatureTable table =
      data::features_from_csv(io::read_file(features_path), features_path.string());
  d.image_ids = std::move(table.image_ids);
  d.features = std::move(table.features);
  d.truth = data::propagate_hierarchy(data::consolidate(records, d.labels, d.image_ids),
                                      d.labels);
  data::write_dataset(dir, d);
  out << "consolidated " << records.size() << " records over " << d.size()
      << " images and " << d.labels.size() << " classes into " << dir.string() << "\n";
}

void cmd_split(RunConfig& rc, std::ostream& out) {
  const fs::path dir = rc.input_dir("dataset", kDatasetFiles);
  const json* split_doc = rc.section("split");
  const auto seed = rc.seed();
  const fs::path out_dir = rc.output_dir();
  rc.fields().finish();

  data::SplitSpec spec = split_doc ? split_spec_from_json(*split_doc) : data::SplitSpec{};
  if (seed) spec.seed = *seed;
  const auto d = data::read_dataset(dir);
  const auto split = data::stratified_split(d.truth, spec);
  write(out_dir, "splits.json", data::split_to_json(split, d.image_ids, spec), out);
  out << "train " << split.train.size() << ", val " << split.val.size() << ", test "
      << split.test.size() << "\n";
}

void cmd_train(RunConfig& rc, std::ostream& out) {
  TrainingSetup s = load_training(rc);
  const fs::path dir = rc.output_dir();
  rc.fields().finish();

  const train::TrainResult r = train::train(s.data, s.model_config, s.train_config);
  const auto ids = class_ids(s.dataset.labels);
  for (const auto& e : r.history) {
    out << "epoch " << e.epoch << " loss " << io::format_double(e.train_loss)
        << " logit_scale " << io::format_double(e.logit_scale);
    if (e.val) out << " val_macro_map " << io::format_double(e.val->macro_map);
    out << "\n";
  }
  out << "best epoch " << r.best_epoch << "\n";
  ordered_json resolved;
  resolved["model"] = model::config_to_json(s.model_config);
  resolved["train"] = train_config_to_json(s.train_config);
  write(dir, "resolved_config.json", resolved.dump(2) + "\n", out);
  write(dir, "history.jsonl", train::history_to_jsonl(r.history, ids), out);
  write(dir, "checkpoint.json", model::checkpoint_to_json(r.model, s.vocab), out);
  if (s.data.val.features.rows() > 0) {
    const auto report =
        train::evaluate_model(r.model, s.data.val, s.data.label_texts, s.train_config.eval_ks);
    write(dir, "val_metrics.json", metrics::report_to_json(report, ids), out);
  }
}

void cmd_sweep(RunConfig& rc, std::ostream& out) {
  std::vector<double> grid = kDefaultGrid;
  std::vector<double> frozen_grid;
  if (rc.fields().has("grid")) rc.fields().get("grid", grid);
  rc.fields().get("frozen_grid", frozen_grid);
  TrainingSetup s = load_training(rc);
  const fs::path dir = rc.output_dir();
  rc.fields().finish();
  if (grid.empty() && frozen_grid.empty()) throw ConfigError("sweep: empty grid");

  std::vector<train::SweepRow> rows;
  if (!grid.empty()) {
    train::TrainConfig c = s.train_config;
    c.logit_scale_frozen = false;
    rows = train::temperature_sweep(grid, s.data, s.model_config, c);
  }
  if (!frozen_grid.empty()) {
    train::TrainConfig c = s.train_config;
    c.logit_scale_frozen = true;
    for (auto& row : train::temperature_sweep(frozen_grid, s.data, s.model_config, c)) {
      rows.push_back(std::move(row));
    }
  }
  const std::string table = train::sweep_to_csv(rows);
  out << table;
  write(dir, "sweep.csv", table, out);
  for (const auto& row : rows) {
    if (!row.error.empty()) throw Error("sweep: a cell failed: " + row.error);
  }
}

// Scores of the predictions file for `ids`, columns in label order.
Matrix read_predictions(const fs::path& path, const std::vector<std::string>& ids,
                        const data::LabelSet& labels) {
  std::map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < ids.size(); ++i) row_of.emplace(ids[i], i);
  Matrix scores(ids.size(), labels.size(), 0.0);
  std::vector<bool> seen(ids.size(), false);
  const auto lines = io::read_lines(path);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (lines[n].empty()) continue;
    try {
      const json doc = json::parse(lines[n]);
      io::JsonFields f(doc, "prediction");
      std::string id;
      f.require("image_id", id);
      const json& s = f.raw("scores");
      f.finish();
      auto it = row_of.find(id);
      if (it == row_of.end()) continue;
      seen[it->second] = true;
      for (const auto& [key, value] : s.items()) {
        const auto c = labels.find_column(static_cast<int>(io::parse_int(key)));
        if (!c) throw ConfigError("unknown class id " + key);
        scores(it->second, *c) = value.get<double>();
      }
    } catch (const json::exception& e) {
      throw ParseError(path.string(), n + 1, e.what());
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(path.string(), n + 1, e.what());
    }
  }
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!seen[i]) throw ConfigError("predictions: no entry for image '" + ids[i] + "'");
  }
  return scores;
}

void cmd_eval(RunConfig& rc, std::ostream& out) {
  const fs::path dir = rc.input_dir("dataset", kDatasetFiles);
  const auto splits = rc.optional_input_file("splits");
  const auto checkpoint = rc.optional_input_file("checkpoint");
  const auto predictions = rc.optional_input_file("predictions");
  std::string part = splits ? "test" : "all";
  rc.fields().get("part", part);
  std::vector<std::size_t> ks = {10};
  rc.fields().get("ks", ks);
  const fs::path out_dir = rc.output_dir();
  rc.fields().finish();
  if (checkpoint.has_value() == predictions.has_value()) {
    throw ConfigError("eval: give exactly one of checkpoint, predictions");
  }

  const auto d = data::read_dataset(dir);
  std::vector<std::size_t> rows;
  if (part == "all") {
    rows = all_rows(d.size());
  } else {
    if (!splits) throw ConfigError("eval: part '" + part + "' needs splits");
    rows = split_part(data::split_from_json(io::read_file(*splits), d.image_ids), part);
  }
  const auto sub = d.subset(rows);
  metrics::ScoredPredictions preds;
  preds.truth = sub.truth;
  std::optional<model::Checkpoint> ckpt;
  if (checkpoint) {
    ckpt = model::load_checkpoint(*checkpoint);
    preds.scores = infer::predict(ckpt->model, sub.features, label_texts(ckpt->vocab, d.labels));
  } else {
    preds.scores = read_predictions(*predictions, sub.image_ids, d.labels);
  }
  std::vector<std::size_t> usable;
  for (std::size_t k : ks) {
    if (k == 0) throw ConfigError("eval: ks entries must be >= 1");
    usable.push_back(std::min(k, d.labels.size()));
  }
  const auto report = metrics::evaluate(preds, usable);
  const std::string text = metrics::report_to_json(report, class_ids(d.labels));
  out << text;
  write(out_dir, "metrics.json", text, out);
  if (ckpt) {
    const Matrix img = model::encode_images(ckpt->model, sub.features);
    const Matrix txt = model::encode_texts(ckpt->model, label_texts(ckpt->vocab, d.labels));
    const auto logits = model::similarity(ckpt->model, img, txt);
    write(out_dir, "logit_histogram.csv",
          infer::logit_histogram_csv(logits.scaled, sub.truth, ckpt->model.logit_scale()),
          out);
  }
}

void cmd_predict(RunConfig& rc, std::ostream& out) {
  const fs::path labels_path = rc.input_file("labels");
  const fs::path features_path = rc.input_file("features");
  const fs::path checkpoint = rc.input_file("checkpoint");
  const auto thresholds = rc.optional_input_file("thresholds");
  const fs::path dir = rc.output_dir();
  rc.fields().finish();

  const auto labels = data::labels_from_csv(io::read_file(labels_path), labels_path.string());
  const auto table = data::features_from_csv(io::read_file(features_path),
                                             features_path.string());
  const auto ckpt = model::load_checkpoint(checkpoint);
  const Matrix p = infer::predict(ckpt.model, table.features, label_texts(ckpt.vocab, labels));
  const auto ids = class_ids(labels);
  std::optional<infer::ThresholdTable> tt;
  if (thresholds) {
    tt = infer::thresholds_from_csv(io::read_file(*thresholds), ids, thresholds->string());
  }
  write(dir, "predictions.jsonl",
        infer::predictions_to_jsonl(table.image_ids, p, ids, tt ? &*tt : nullptr), out);
}

void cmd_zeroshot(RunConfig& rc, std::ostream& out) {
  const fs::path features_path = rc.input_file("features");
  const fs::path checkpoint = rc.input_file("checkpoint");
  std::vector<std::string> prompts;
  rc.fields().require("prompts", prompts);
  const fs::path dir = rc.output_dir();
  rc.fields().finish();

  const auto table = data::features_from_csv(io::read_file(features_path),
                                             features_path.string());
  const auto ckpt = model::load_checkpoint(checkpoint);
  const Matrix p = infer::zero_shot(ckpt.model, ckpt.vocab, table.features, prompts);
  std::string text;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    ordered_json j;
    j["image_id"] = table.image_ids[i];
    ordered_json s = ordered_json::object();
    for (std::size_t c = 0; c < prompts.size(); ++c) s[prompts[c]] = p(i, c);
    j["scores"] = std::move(s);
    text += j.dump() + "\n";
  }
  write(dir, "zeroshot.jsonl", text, out);
}

void cmd_thresholds(RunConfig& rc, std::ostream& out) {
  const fs::path dir = rc.input_dir("dataset", kDatasetFiles);
  const fs::path splits = rc.input_file("splits");
  const fs::path checkpoint = rc.input_file("checkpoint");
  std::vector<double> targets = {0.99};
  if (rc.fields().has("target_recall")) {
    if (rc.fields().raw("target_recall").is_number()) {
      double t = 0.0;
      rc.fields().get("target_recall", t);
      targets = {t};
    } else {
      rc.fields().get("target_recall", targets);
    }
  }
  const fs::path out_dir = rc.output_dir();
  rc.fields().finish();

  const auto d = data::read_dataset(dir);
  const auto split = data::split_from_json(io::read_file(splits), d.image_ids);
  const auto ckpt = model::load_checkpoint(checkpoint);
  const auto texts = label_texts(ckpt.vocab, d.labels);
  if (targets.size() == 1) targets.assign(d.labels.size(), targets[0]);
  const auto val = d.subset(split.val);
  const auto test = d.subset(split.test);
  const auto table = infer::select_thresholds(
      infer::predict(ckpt.model, val.features, texts), val.truth, targets);
  const auto on_test = infer::apply_thresholds(
      table, infer::predict(ckpt.model, test.features, texts), test.truth);
  const auto ids = class_ids(d.labels);
  write(out_dir, "thresholds.csv", infer::thresholds_to_csv(table, ids), out);
  write(out_dir, "thresholds_test.csv", infer::thresholds_to_csv(on_test, ids), out);
  ordered_json summary;
  summary["val"] = {{"recall", table.recall}, {"drop_fraction", table.drop_fraction}};
  summary["test"] = {{"recall", on_test.recall}, {"drop_fraction", on_test.drop_fraction}};
  out << summary.dump(2) << "\n";
  write(out_dir, "thresholds_summary.json", summary.dump(2) + "\n", out);
}

void cmd_export_embeddings(RunConfig& rc, std::ostream& out) {
  const fs::path features_path = rc.input_file("features");
  const fs::path checkpoint = rc.input_file("checkpoint");
  const fs::path dir = rc.output_dir();
  rc.fields().finish();

  const auto table = data::features_from_csv(io::read_file(features_path),
                                             features_path.string());
  const auto ckpt = model::load_checkpoint(checkpoint);
  infer::export_embeddings(dir / "embeddings.csv", ckpt.model, table.image_ids,
                           table.features);
  out << "wrote " << (dir / "embeddings.csv").string() << "\n";
}

// --set a.b=value: value is parsed as JSON when it is valid JSON, else
// taken as a string.
void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("--set expects key=value, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) throw ConfigError("--set: empty key segment in '" + key + "'");
    if (!node->is_object()) throw ConfigError("--set: '" + key + "' crosses a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  using Command = std::function<void(RunConfig&, std::ostream&)>;
  const std::vector<std::pair<std::string, std::pair<std::string, Command>>> commands = {
      {"synth", {"generate a synthetic dataset", cmd_synth}},
      {"consolidate", {"turn annotation votes into ground truth", cmd_consolidate}},
      {"split", {"stratified train/val/test split", cmd_split}},
      {"train", {"train a model", cmd_train}},
      {"sweep", {"train once per logit_scale initialization", cmd_sweep}},
      {"eval", {"ranking metrics of a model or predictions file", cmd_eval}},
      {"predict", {"class probabilities per image", cmd_predict}},
      {"zeroshot", {"score free-form prompts", cmd_zeroshot}},
      {"thresholds", {"per-class storage thresholds", cmd_thresholds}},
      {"export-embeddings", {"write image embeddings", cmd_export_embeddings}},
  };

  CLI::App app{"Multi-label classification with a contrastive dual encoder", "mlcl"};
  app.fallthrough();
  app.require_subcommand(1, 1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "JSON run config");
  app.add_option("--seed", seed, "seed for every random stream of the command");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--set", overrides, "override a config key, e.g. train.epochs=5");
  for (const auto& [name, entry] : commands) app.add_subcommand(name, entry.first);

  std::vector<std::string> rest(args.rbegin(), args.rend());
  if (!rest.empty()) rest.pop_back();  // program name
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    json doc = json::object();
    if (!config_path.empty()) {
      try {
        doc = json::parse(io::read_file(config_path));
      } catch (const json::parse_error& e) {
        throw ConfigError(config_path + ": " + e.what());
      }
      if (!doc.is_object()) throw ConfigError(config_path + ": expected a JSON object");
    }
    for (const auto& o : overrides) apply_override(doc, o);
    if (seed) doc["seed"] = *seed;
    if (!out_dir.empty()) doc["out"] = out_dir;
    RunConfig rc(std::move(doc), name);
    for (const auto& [cmd, entry] : commands) {
      if (cmd == name) entry.second(rc, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace mlcl::cli
