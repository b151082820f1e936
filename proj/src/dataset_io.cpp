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

#include "mlcl/dataset_io.hpp"

#include <unordered_map>

#include "json.hpp"
#include "mlcl/errors.hpp"
#include "mlcl/json_fields.hpp"
#include "mlcl/text_io.hpp"

namespace mlcl::data {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

const std::vector<std::string> kLabelHeader = {
    "class_id", "name",      "description",        "category",
    "parent_id", "prompt_mode", "agreement_threshold"};

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t") == std::string::npos;
}

// Runs `fn` and rethrows any library error as a ParseError at `line`.
template <typename Fn>
auto at_line(const std::string& source, std::size_t line, Fn&& fn) {
  try {
    return fn();
  } catch (const ParseError&) {
    throw;
  } catch (const json::exception& e) {
    throw ParseError(source, line, e.what());
  } catch (const Error& e) {
    throw ParseError(source, line, e.what());
  }
}

int parse_class_id(const std::string& s) {
  const long long v = io::parse_int(s);
  if (v < 0 || v > 1'000'000'000) throw Error("class id out of range: " + s);
  return static_cast<int>(v);
}

std::unordered_map<std::string, std::size_t> index_ids(
    const std::vector<std::string>& image_ids) {
  std::unordered_map<std::string, std::size_t> rows;
  for (std::size_t i = 0; i < image_ids.size(); ++i) {
    if (!rows.emplace(image_ids[i], i).second) {
      throw ConfigError("duplicate image id '" + image_ids[i] + "'");
    }
  }
  return rows;
}

}  // namespace

std::string labels_to_csv(const LabelSet& labels) {
  std::string out = io::join_csv_record(kLabelHeader) + "\n";
  for (const auto& l : labels.labels()) {
    out += io::join_csv_record(
               {std::to_string(l.class_id), l.name, l.description, l.category,
                l.parent_id ? std::to_string(*l.parent_id) : "",
                to_string(l.prompt_mode),
                io::format_double(l.agreement_threshold)}) +
           "\n";
  }
  return out;
}

LabelSet labels_from_csv(const std::string& text, const std::string& source) {
  const auto lines = io::split_lines(text);
  if (lines.empty()) throw ParseError(source, 1, "missing header");
  if (io::split_csv_record(lines[0]) != kLabelHeader) {
    throw ParseError(source, 1, "unexpected header");
  }
  std::vector<LabelDef> defs;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    if (blank(lines[n])) continue;
    defs.push_back(at_line(source, n + 1, [&] {
      const auto f = io::split_csv_record(lines[n]);
      if (f.size() != kLabelHeader.size()) {
        throw Error("expected " + std::to_string(kLabelHeader.size()) +
                    " fields, got " + std::to_string(f.size()));
      }
      LabelDef l;
      l.class_id = parse_class_id(f[0]);
      l.name = f[1];
      l.description = f[2];
      l.category = f[3];
      if (!f[4].empty()) l.parent_id = parse_class_id(f[4]);
      l.prompt_mode = prompt_mode_from_string(f[5]);
      l.agreement_threshold = f[6].empty() ? kDefaultAgreementThreshold
                                           : io::parse_double(f[6]);
      return l;
    }));
  }
  return LabelSet(std::move(defs));
}

std::string annotations_to_jsonl(const std::vector<AnnotationRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    ordered_json j;
    j["image_id"] = r.image_id;
    j["class_id"] = r.class_id;
    j["votes_positive"] = r.votes_positive;
    j["votes_total"] = r.votes_total;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<AnnotationRecord> annotations_from_jsonl(const std::string& text,
                                                     const std::string& source) {
  std::vector<AnnotationRecord> out;
  const auto lines = io::split_lines(text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (blank(lines[n])) continue;
    out.push_back(at_line(source, n + 1, [&] {
      const json doc = json::parse(lines[n]);
      io::JsonFields f(doc, "annotation");
      AnnotationRecord r;
      f.require("image_id", r.image_id);
      f.require("class_id", r.class_id);
      f.require("votes_positive", r.votes_positive);
      f.get("votes_total", r.votes_total);
      f.finish();
      if (r.votes_total < 1 || r.votes_positive < 0 ||
          r.votes_positive > r.votes_total) {
        throw Error("votes must satisfy 0 <= votes_positive <= votes_total, "
                    "votes_total >= 1");
      }
      return r;
    }));
  }
  return out;
}

std::string features_to_csv(const std::vector<std::string>& image_ids,
                            const Matrix& features) {
  if (image_ids.size() != features.rows()) {
    throw DimensionError("features_to_csv: id count does not match rows");
  }
  std::vector<std::string> header = {"image_id"};
  for (std::size_t d = 0; d < features.cols(); ++d) {
    header.push_back("f" + std::to_string(d));
  }
  std::string out = io::join_csv_record(header) + "\n";
  for (std::size_t i = 0; i < features.rows(); ++i) {
    out += io::csv_field(image_ids[i]);
    for (double v : features.row(i)) {
      out += ',';
      out += io::format_double(v);
    }
    out += '\n';
  }
  return out;
}

FeatureTable features_from_csv(const std::string& text,
                               const std::string& source) {
  const auto lines = io::split_lines(text);
  if (lines.empty()) throw ParseError(source, 1, "missing header");
  const auto header = io::split_csv_record(lines[0]);
  if (header.empty() || header[0] != "image_id") {
    throw ParseError(source, 1, "header must start with image_id");
  }
  const std::size_t d = header.size() - 1;
  FeatureTable out;
  std::vector<double> values;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    if (blank(lines[n])) continue;
    at_line(source, n + 1, [&] {
      const auto f = io::split_csv_record(lines[n]);
      if (f.size() != d + 1) {
        throw Error("expected " + std::to_string(d + 1) + " fields, got " +
                    std::to_string(f.size()));
      }
      if (f[0].empty()) throw Error("empty image id");
      out.image_ids.push_back(f[0]);
      for (std::size_t k = 1; k <= d; ++k) values.push_back(io::parse_double(f[k]));
      return 0;
    });
  }
  out.features = Matrix(out.image_ids.size(), d, std::move(values));
  index_ids(out.image_ids);
  return out;
}

std::string ground_truth_to_jsonl(const std::vector<std::string>& image_ids,
                                  const BinaryMatrix& truth,
                                  const LabelSet& labels) {
  if (image_ids.size() != truth.rows() || truth.cols() != labels.size()) {
    throw DimensionError("ground_truth_to_jsonl: shape mismatch");
  }
  std::string out;
  for (std::size_t i = 0; i < truth.rows(); ++i) {
    ordered_json j;
    j["image_id"] = image_ids[i];
    std::vector<int> ids;
    for (std::size_t c = 0; c < truth.cols(); ++c) {
      if (truth(i, c)) ids.push_back(labels[c].class_id);
    }
    j["positive_class_ids"] = ids;
    out += j.dump() + "\n";
  }
  return out;
}

BinaryMatrix ground_truth_from_jsonl(const std::string& text,
                                     const std::vector<std::string>& image_ids,
                                     const LabelSet& labels,
                                     const std::string& source) {
  const auto rows = index_ids(image_ids);
  BinaryMatrix truth(image_ids.size(), labels.size());
  const auto lines = io::split_lines(text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (blank(lines[n])) continue;
    at_line(source, n + 1, [&] {
      const json doc = json::parse(lines[n]);
      io::JsonFields f(doc, "ground_truth");
      std::string id;
      std::vector<int> classes;
      f.require("image_id", id);
      f.require("positive_class_ids", classes);
      f.finish();
      auto row = rows.find(id);
      if (row == rows.end()) throw Error("unknown image id '" + id + "'");
      for (int c : classes) truth.set(row->second, labels.column_of(c), true);
      return 0;
    });
  }
  return truth;
}

std::string split_to_json(const SplitAssignment& split,
                          const std::vector<std::string>& image_ids,
                          const SplitSpec& spec) {
  auto names = [&](const std::vector<std::size_t>& rows) {
    std::vector<std::string> out;
    for (std::size_t r : rows) out.push_back(image_ids.at(r));
    return out;
  };
  ordered_json j;
  j["seed"] = spec.seed;
  j["ratios"] = {spec.train, spec.val, spec.test};
  j["train"] = names(split.train);
  j["val"] = names(split.val);
  j["test"] = names(split.test);
  return j.dump(1) + "\n";
}

SplitAssignment split_from_json(const std::string& text,
                                const std::vector<std::string>& image_ids) {
  const auto rows = index_ids(image_ids);
  const json doc = at_line("splits", 1, [&] { return json::parse(text); });
  io::JsonFields f(doc, "splits");
  SplitAssignment out;
  std::vector<int> seen(image_ids.size(), 0);
  auto read_part = [&](const char* key, std::vector<std::size_t>& dst) {
    std::vector<std::string> ids;
    f.require(key, ids);
    for (const auto& id : ids) {
      auto it = rows.find(id);
      if (it == rows.end()) {
        throw ConfigError(std::string("splits.") + key + ": unknown image id '" +
                          id + "'");
      }
      if (seen[it->second]++) {
        throw ConfigError("splits: image '" + id + "' listed twice");
      }
      dst.push_back(it->second);
    }
  };
  read_part("train", out.train);
  read_part("val", out.val);
  read_part("test", out.test);
  f.raw("seed");
  f.raw("ratios");
  f.finish();
  return out;
}

void write_dataset(const std::filesystem::path& dir,
                   const ConsolidatedDataset& dataset) {
  dataset.validate();
  io::write_file(dir / "labels.csv", labels_to_csv(dataset.labels));
  io::write_file(dir / "features.csv",
                 features_to_csv(dataset.image_ids, dataset.features));
  io::write_file(dir / "ground_truth.jsonl",
                 ground_truth_to_jsonl(dataset.image_ids, dataset.truth,
                                       dataset.labels));
}

ConsolidatedDataset read_dataset(const std::filesystem::path& dir) {
  ConsolidatedDataset out;
  out.labels = labels_from_csv(io::read_file(dir / "labels.csv"),
                               (dir / "labels.csv").string());
  FeatureTable table = features_from_csv(io::read_file(dir / "features.csv"),
                                         (dir / "features.csv").string());
  out.image_ids = std::move(table.image_ids);
  out.features = std::move(table.features);
  out.truth = ground_truth_from_jsonl(
      io::read_file(dir / "ground_truth.jsonl"), out.image_ids, out.labels,
      (dir / "ground_truth.jsonl").string());
  out.validate();
  return out;
}

}  // namespace mlcl::data
