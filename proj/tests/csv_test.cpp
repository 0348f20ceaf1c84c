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

#include <cmath>
#include <filesystem>
#include <limits>

#include "gtest/gtest.h"
#include "oracles.hpp"

namespace mmvae::csv {
namespace {

std::filesystem::path Scratch(const std::string& name, const std::string& contents) {
  const auto path = std::filesystem::temp_directory_path() / ("mmvae_csv_" + name);
  write_text(path, contents);
  return path;
}

TEST(CsvTest, RealsRoundTripBitwise) {
  for (double v : testing::RandomVector(1000, 1, 1e6)) {
    EXPECT_EQ(parse_real(format_real(v)), v);
    EXPECT_EQ(parse_real(format_real(v * 1e-300)), v * 1e-300);
  }
  EXPECT_EQ(format_real(0.1), "0.10000000000000001");
  EXPECT_EQ(parse_real(format_real(std::numeric_limits<double>::denorm_min())),
            std::numeric_limits<double>::denorm_min());
}

TEST(CsvTest, ParseRejectsJunk) {
  EXPECT_THROW(parse_real(""), IoError);
  EXPECT_THROW(parse_real("1.5x"), IoError);
  EXPECT_THROW(parse_int("1.5"), IoError);
  EXPECT_THROW(parse_int(""), IoError);
  EXPECT_EQ(parse_int("-42"), -42);
}

TEST(CsvTest, SplitKeepsEmptyFields) {
  EXPECT_EQ(split("a,,b,"), (std::vector<std::string>{"a", "", "b", ""}));
  const std::vector<std::string> fields{"x", "y"};
  EXPECT_EQ(join(fields), "x,y");
}

TEST(CsvTest, TableReadsHeaderAndRows) {
  const auto path = Scratch("table.csv", "a,b\r\n1,2\n\n3,4\n");
  const auto t = read_table(path);
  EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.column("b"), 1u);
  EXPECT_THROW(t.column("c"), IoError);
  EXPECT_THROW(read_table(Scratch("empty.csv", "")), IoError);
  EXPECT_THROW(read_text("/nonexistent/mmvae.csv"), IoError);
}

TEST(CsvTest, ValidatesDatasetSchema) {
  EXPECT_TRUE(validate(Scratch("d1.csv", "x1_a,x1_b,x2\n0.5,1,0\n-2,3e-4,1\n"),
                       Schema::kDataset).ok);
  EXPECT_FALSE(validate(Scratch("d2.csv", "x1_a,x2\n0.5,0\n"), Schema::kDataset).ok);
  EXPECT_FALSE(validate(Scratch("d3.csv", "x1_a,x1_b,x2\n0.5,1,0.5\n"), Schema::kDataset).ok);
  EXPECT_FALSE(validate(Scratch("d4.csv", "x1_a,x1_b,x2\n0.5,1\n"), Schema::kDataset).ok);
  EXPECT_FALSE(validate(Scratch("d5.csv", "x1_a,x1_b,x2\nnan,1,0\n"), Schema::kDataset).ok);
  EXPECT_FALSE(validate("/nonexistent/mmvae.csv", Schema::kDataset).ok);
}

TEST(CsvTest, ValidatesRunRecordSchema) {
  const std::string header =
      "epoch,objective,t1,mean_err_c0,var_ratio_a_c0,var_ratio_b_c0,mean_err_c1,"
      "var_ratio_a_c1,var_ratio_b_c1,seconds\n";
  EXPECT_TRUE(validate(Scratch("r1.csv", header + "1,-3.5,2,0.1,0.2,0.3,0.4,0.5,0.6,1.5\n"),
                       Schema::kRunRecord).ok);
  EXPECT_TRUE(validate(Scratch("r2.csv", header + "1,-3.5,2,0.1,0.2,0.3,nan,nan,nan,1.5\n"),
                       Schema::kRunRecord).ok);
  EXPECT_FALSE(validate(Scratch("r3.csv", header + "1,nan,2,0.1,0.2,0.3,0.4,0.5,0.6,1.5\n"),
                        Schema::kRunRecord).ok);
  EXPECT_FALSE(validate(Scratch("r4.csv", "epoch,objective,seconds\n1,2,3\n"),
                        Schema::kRunRecord).ok);
}

TEST(CsvTest, SchemaNames) {
  for (const char* n : {"dataset", "samples", "latent", "runrecord", "theorem", "collapse"})
    EXPECT_NO_THROW(schema_from_name(n));
  EXPECT_THROW(schema_from_name("plot"), std::invalid_argument);
}

}  // namespace
}  // namespace mmvae::csv
