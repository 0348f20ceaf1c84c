// Copyright 2026 The mmvae-lab Authors. All Rights Reserved.
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

#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mmvae::csv {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 17 significant digits; parses back to the identical double.
std::string format_real(double value);
double parse_real(std::string_view text);
long long parse_int(std::string_view text);

std::vector<std::string> split(std::string_view line, char sep = ',');
std::string join(std::span<const std::string> fields, char sep = ',');
std::string join_reals(std::span<const double> values, char sep = ',');

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of `column` in the header; throws IoError when absent.
  std::size_t column(std::string_view name) const;
};

Table read_table(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view contents);
std::string read_text(const std::filesystem::path& path);

// Known file kinds emitted by the tools.
enum class Schema { kDataset, kSamples, kLatent, kRunRecord, kTheorem, kCollapse };

struct SchemaCheck {
  bool ok = true;
  std::string message;
  std::size_t rows = 0;
};

// Validates header shape, column counts, and that numeric columns parse.
SchemaCheck validate(const std::filesystem::path& path, Schema schema);
Schema schema_from_name(std::string_view name);

}  // namespace mmvae::csv
