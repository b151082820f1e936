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

#ifndef MLCL_JSON_FIELDS_HPP_
#define MLCL_JSON_FIELDS_HPP_

#include <set>
#include <string>
#include <type_traits>

#include "json.hpp"
#include "mlcl/errors.hpp"

namespace mlcl::io {

// Reads members of a JSON object and rejects members nobody asked for.
//
//   JsonFields f(doc, "model");
//   f.get("d_e", cfg.d_e);
//   f.finish();  // throws ConfigError on unknown keys
class JsonFields {
 public:
  JsonFields(const nlohmann::json& object, std::string context)
      : object_(object), context_(std::move(context)) {
    if (!object_.is_object()) {
      throw ConfigError(context_ + ": expected a JSON object");
    }
  }

  bool has(const std::string& key) const { return object_.contains(key); }

  // Leaves `out` untouched when the key is absent.
  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = object_.find(key);
    if (it == object_.end()) return;
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (!it->is_number_unsigned()) {
        throw ConfigError(context_ + "." + key +
                          ": expected a non-negative integer");
      }
    }
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(context_ + "." + key + ": " + e.what());
    }
  }

  template <typename T>
  void require(const std::string& key, T& out) {
    if (!has(key)) throw ConfigError(context_ + ": missing key '" + key + "'");
    get(key, out);
  }

  const nlohmann::json& raw(const std::string& key) {
    seen_.insert(key);
    return object_.at(key);
  }

  void finish() const {
    for (const auto& item : object_.items()) {
      if (seen_.count(item.key()) == 0) {
        throw ConfigError(context_ + ": unknown key '" + item.key() + "'");
      }
    }
  }

 private:
  const nlohmann::json& object_;
  std::string context_;
  std::set<std::string> seen_;
};

}  // namespace mlcl::io

#endif  // MLCL_JSON_FIELDS_HPP_
