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

#include "mmvae/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace mmvae::csv {

std::string format_real(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

double parse_real(std::string_view text) {
  std::string s(text);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw IoError("not a number: '" + s + "'");
  }
  return v;
}

long long parse_int(std::string_view text) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw IoError("not an integer: '" + std::string(text) + "'");
  }
  return v;
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string join(std::span<const std::string> fields, char sep) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(sep);
    out += fields[i];
  }
  return out;
}

std::string join_reals(std::span<const double> values, char sep) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out.push_back(sep);
    out += format_real(values[i]);
  }
  return out;
}

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw IoError("missing column '" + std::string(name) + "'");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Table read_table(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  Table table;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      table.header = split(line);
      first = false;
    } else {
      table.rows.push_back(split(line));
    }
  }
  if (first) throw IoError(path.string() + ": empty file, no header");
  return table;
}

namespace {

// kMetric also admits nan (a class absent from the data).
enum class ColumnType { kReal, kMetric, kInt, kText };

struct ColumnSpec {
  std::string name;
  ColumnType type;
};

std::vector<ColumnSpec> FixedColumns(Schema schema) {
  using enum ColumnType;
  switch (schema) {
    case Schema::kDataset:
      return {{"x1_a", kReal}, {"x1_b", kReal}, {"x2", kInt}};
    case Schema::kSamples:
      return {{"x1_a", kReal}, {"x1_b", kReal}, {"source", kText}};
    case Schema::kLatent:
      return {{"g_a", kReal}, {"g_b", kReal}, {"modality", kText}, {"label", kInt}};
    case Schema::kTheorem:
      return {{"class", kInt},          {"modality", kInt}, {"trial", kInt},
              {"kind", kText},          {"seed", kInt},     {"weight_scale", kReal},
              {"model_lm", kReal},      {"stderr", kReal},  {"analytic_bound", kReal},
              {"gap", kReal},           {"status", kText}};
    case Schema::kCollapse:
      return {{"label", kInt},
              {"n_samples", kInt},
              {"mean_error", kReal},
              {"var_ratio_a", kReal},
              {"var_ratio_b", kReal},
              {"sampled_mean_error", kReal},
              {"sampled_var_ratio_a", kReal},
              {"sampled_var_ratio_b", kReal}};
    case Schema::kRunRecord:
      return {};
  }
  return {};
}

bool CheckCell(const std::string& cell, ColumnType type) {
  try {
    switch (type) {
      case ColumnType::kReal:
        return std::isfinite(parse_real(cell));
      case ColumnType::kMetric:
        return !std::isinf(parse_real(cell));
      case ColumnType::kInt:
        parse_int(cell);
        return true;
      case ColumnType::kText:
        return !cell.empty();
    }
  } catch (const IoError&) {
    return false;
  }
  return false;
}

}  // namespace

Schema schema_from_name(std::string_view name) {
  if (name == "dataset") return Schema::kDataset;
  if (name == "samples") return Schema::kSamples;
  if (name == "latent") return Schema::kLatent;
  if (name == "runrecord") return Schema::kRunRecord;
  if (name == "theorem") return Schema::kTheorem;
  if (name == "collapse") return Schema::kCollapse;
  throw std::invalid_argument("unknown schema '" + std::string(name) + "'");
}

SchemaCheck validate(const std::filesystem::path& path, Schema schema) {
  SchemaCheck check;
  Table table;
  try {
    table = read_table(path);
  } catch (const IoError& e) {
    return {false, e.what(), 0};
  }
  check.rows = table.rows.size();

  std::vector<ColumnSpec> columns = FixedColumns(schema);
  if (schema == Schema::kRunRecord) {
    // epoch,objective,<terms...>,<six collapse columns>,seconds
    static const std::vector<std::string> kTail = {
        "mean_err_c0", "var_ratio_a_c0", "var_ratio_b_c0", "mean_err_c1",
        "var_ratio_a_c1", "var_ratio_b_c1", "seconds"};
    const auto& h = table.header;
    if (h.size() < 2 + kTail.size() || h[0] != "epoch" || h[1] != "objective") {
      return {false, "runrecord header must start with epoch,objective", check.rows};
    }
    for (std::size_t i = 0; i < kTail.size(); ++i) {
      if (h[h.size() - kTail.size() + i] != kTail[i]) {
        return {false, "runrecord header must end with collapse columns and seconds",
                check.rows};
      }
    }
    columns.push_back({"epoch", ColumnType::kInt});
    for (std::size_t i = 1; i < h.size(); ++i) {
      const bool metric = i >= h.size() - kTail.size() && i + 1 < h.size();
      columns.push_back({h[i], metric ? ColumnType::kMetric : ColumnType::kReal});
    }
  }

  if (table.header.size() != columns.size()) {
    return {false, "expected " + std::to_string(columns.size()) + " columns, header has " +
                       std::to_string(table.header.size()),
            check.rows};
  }
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (table.header[i] != columns[i].name) {
      return {false, "column " + std::to_string(i) + " should be '" + columns[i].name +
                         "', found '" + table.header[i] + "'",
              check.rows};
    }
  }
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != columns.size()) {
      return {false, "row " + std::to_string(r + 1) + " has " + std::to_string(row.size()) +
                         " fields",
              check.rows};
    }
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (!CheckCell(row[i], columns[i].type)) {
        return {false, "row " + std::to_string(r + 1) + ", column '" + columns[i].name +
                           "': bad value '" + row[i] + "'",
                check.rows};
      }
    }
  }
  return check;
}

}  // namespace mmvae::csv
