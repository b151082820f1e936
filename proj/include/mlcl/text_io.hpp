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

// Small text helpers shared by the file formats: shortest round-trip number
// formatting, RFC 4180 CSV records, and whole-file read/write.

#ifndef MLCL_TEXT_IO_HPP_
#define MLCL_TEXT_IO_HPP_

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mlcl::io {

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);
// Whole-string parse; throws Error on trailing garbage or empty input.
double parse_double(std::string_view s);
long long parse_int(std::string_view s);

// Splits one CSV record. Fields may be double-quoted; "" escapes a quote.
// Throws Error on an unterminated quote.
std::vector<std::string> split_csv_record(std::string_view line);
// Quotes a field when it contains a comma, quote, or newline.
std::string csv_field(std::string_view field);
std::string join_csv_record(const std::vector<std::string>& fields);

// Splits on '\n', dropping '\r' terminators; no trailing empty line.
std::vector<std::string> split_lines(const std::string& text);

std::string read_file(const std::filesystem::path& path);
// Lines without terminators; a trailing empty line is dropped.
std::vector<std::string> read_lines(const std::filesystem::path& path);
// Truncates and writes in binary mode.
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace mlcl::io

#endif  // MLCL_TEXT_IO_HPP_
