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

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "mmvae/tensor.hpp"

namespace mmvae::data {

enum class ShapeKind { kGaussians, kArcs };

ShapeKind shape_from_name(std::string_view name);
std::string_view name(ShapeKind kind);

// Two classes, each a cloud in the plane. `gaussians` draws
// x1 ~ N(center_c, diag(noise_scales_c^2)); `arcs` puts points on a
// half-circle of radius 2 around center_c (upper half for class 0, lower
// half for class 1) plus isotropic noise of scale noise_scales_c[0].
struct DataGenConfig {
  std::size_t n_per_class = 1000;
  ShapeKind shape = ShapeKind::kGaussians;
  std::array<double, 2> class0_center{-2.0, 0.0};
  std::array<double, 2> class1_center{2.0, 0.0};
  std::array<std::array<double, 2>, 2> noise_scales{{{0.3, 1.2}, {0.3, 1.2}}};
  std::uint64_t seed = 0;

  void validate() const;
};

// Paired samples: x1 in R^2 (row-major N x 2) and an integer label x2.
// `class_index_sets()[c]` lists the rows with label c, in row order.
class MultimodalDataset {
 public:
  MultimodalDataset() = default;
  // Throws std::invalid_argument on negative labels or ragged input.
  MultimodalDataset(std::vector<double> x1, std::vector<int> x2);

  std::size_t size() const { return x2_.size(); }
  std::size_t num_classes() const { return class_index_sets_.size(); }
  std::span<const double> x1() const { return x1_; }
  std::span<const int> x2() const { return x2_; }
  const std::vector<std::vector<std::size_t>>& class_index_sets() const {
    return class_index_sets_;
  }
  std::span<const std::size_t> class_indices(int label) const;

  // N x 2 tensor of the selected rows.
  Tensor x1_rows(std::span<const std::size_t> rows) const;
  Tensor x1_all() const;
  // One-hot N x C tensor of the selected labels.
  Tensor x2_one_hot(std::span<const std::size_t> rows) const;

 private:
  std::vector<double> x1_;
  std::vector<int> x2_;
  std::vector<std::vector<std::size_t>> class_index_sets_;
};

MultimodalDataset generate(const DataGenConfig& cfg);

// CSV with header `x1_a,x1_b,x2`.
void write_csv(const std::filesystem::path& path, const MultimodalDataset& ds);
std::string to_csv(const MultimodalDataset& ds);
MultimodalDataset read_csv(const std::filesystem::path& path);

enum class MleFamily { kGaussianDiag, kCategorical };

inline constexpr double kVarianceFloor = 1e-8;

// Maximum-likelihood fit of one parametric family to a set of points.
struct MleSolution {
  MleFamily family = MleFamily::kGaussianDiag;
  std::size_t count = 0;
  std::vector<double> mean;           // gaussian
  std::vector<double> variance;       // gaussian, biased (1/N), floored
  std::vector<double> probabilities;  // categorical
  double log_likelihood = 0.0;        // sum_n log f(x_n | tau_hat)
  bool variance_floored = false;
};

// `rows` is N x D. Throws std::invalid_argument when N == 0.
MleSolution gaussian_mle(const Tensor& rows);
MleSolution categorical_mle(std::span<const int> labels, std::size_t num_classes);

// Fit over the rows of class `label`: gaussian on x1, categorical on x2.
MleSolution class_mle(const MultimodalDataset& ds, int label, MleFamily family);

// sum_n log f(x_n | tau) for a fixed gaussian parameter.
double gaussian_log_likelihood(const Tensor& rows, std::span<const double> mean,
                               std::span<const double> variance);

}  // namespace mmvae::data
