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

#include "mmvae/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mmvae/csv.hpp"
#include "mmvae/random.hpp"

namespace mmvae::data {

ShapeKind shape_from_name(std::string_view name) {
  if (name == "gaussians") return ShapeKind::kGaussians;
  if (name == "arcs") return ShapeKind::kArcs;
  throw std::invalid_argument("unknown dataset shape '" + std::string(name) + "'");
}

std::string_view name(ShapeKind kind) {
  return kind == ShapeKind::kGaussians ? "gaussians" : "arcs";
}

void DataGenConfig::validate() const {
  if (n_per_class < 1) throw std::invalid_argument("n_per_class must be >= 1");
  for (const auto& scales : noise_scales) {
    for (double s : scales) {
      if (!(s >= 0.0) || !std::isfinite(s)) {
        throw std::invalid_argument("noise scales must be finite and >= 0");
      }
    }
  }
}

MultimodalDataset::MultimodalDataset(std::vector<double> x1, std::vector<int> x2)
    : x1_(std::move(x1)), x2_(std::move(x2)) {
  if (x1_.size() != 2 * x2_.size()) {
    throw std::invalid_argument("dataset: x1 must hold two values per label");
  }
  int max_label = 1;  // at least two classes
  for (int label : x2_) {
    if (label < 0) throw std::invalid_argument("dataset: negative label");
    max_label = std::max(max_label, label);
  }
  class_index_sets_.assign(static_cast<std::size_t>(max_label) + 1, {});
  for (std::size_t n = 0; n < x2_.size(); ++n) {
    class_index_sets_[static_cast<std::size_t>(x2_[n])].push_back(n);
  }
}

std::span<const std::size_t> MultimodalDataset::class_indices(int label) const {
  if (label < 0 || static_cast<std::size_t>(label) >= class_index_sets_.size()) {
    throw DomainError("no class " + std::to_string(label) + " in dataset");
  }
  return class_index_sets_[static_cast<std::size_t>(label)];
}

Tensor MultimodalDataset::x1_rows(std::span<const std::size_t> rows) const {
  std::vector<double> out;
  out.reserve(rows.size() * 2);
  for (std::size_t r : rows) {
    out.push_back(x1_.at(2 * r));
    out.push_back(x1_.at(2 * r + 1));
  }
  return Tensor({rows.size(), 2}, std::move(out));
}

Tensor MultimodalDataset::x1_all() const { return Tensor({size(), 2}, x1_); }

Tensor MultimodalDataset::x2_one_hot(std::span<const std::size_t> rows) const {
  const std::size_t c = num_classes();
  std::vector<double> out(rows.size() * c, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out[i * c + static_cast<std::size_t>(x2_.at(rows[i]))] = 1.0;
  }
  return Tensor({rows.size(), c}, std::move(out));
}

MultimodalDataset generate(const DataGenConfig& cfg) {
  cfg.validate();
  NoiseSource rng(cfg.seed);
  std::vector<double> x1;
  std::vector<int> x2;
  x1.reserve(4 * cfg.n_per_class);
  x2.reserve(2 * cfg.n_per_class);
  for (int c = 0; c < 2; ++c) {
    const auto& center = c == 0 ? cfg.class0_center : cfg.class1_center;
    const auto& noise = cfg.noise_scales[static_cast<std::size_t>(c)];
    for (std::size_t n = 0; n < cfg.n_per_class; ++n) {
      double a = 0.0, b = 0.0;
      if (cfg.shape == ShapeKind::kGaussians) {
        a = center[0] + noise[0] * rng.normal();
        b = center[1] + noise[1] * rng.normal();
      } else {
        const double offset = c == 0 ? 0.0 : std::numbers::pi;
        const double angle = offset + rng.uniform(0.0, std::numbers::pi);
        a = center[0] + 2.0 * std::cos(angle) + noise[0] * rng.normal();
        b = center[1] + 2.0 * std::sin(angle) + noise[0] * rng.normal();
      }
      x1.push_back(a);
      x1.push_back(b);
      x2.push_back(c);
    }
  }
  return MultimodalDataset(std::move(x1), std::move(x2));
}

std::string to_csv(const MultimodalDataset& ds) {
  std::string out = "x1_a,x1_b,x2\n";
  const auto x1 = ds.x1();
  const auto x2 = ds.x2();
  for (std::size_t n = 0; n < ds.size(); ++n) {
    out += csv::format_real(x1[2 * n]);
    out += ',';
    out += csv::format_real(x1[2 * n + 1]);
    out += ',';
    out += std::to_string(x2[n]);
    out += '\n';
  }
  return out;
}

void write_csv(const std::filesystem::path& path, const MultimodalDataset& ds) {
  csv::write_text(path, to_csv(ds));
}

MultimodalDataset read_csv(const std::filesystem::path& path) {
  const csv::Table table = csv::read_table(path);
  const std::size_t ia = table.column("x1_a");
  const std::size_t ib = table.column("x1_b");
  const std::size_t il = table.column("x2");
  std::vector<double> x1;
  std::vector<int> x2;
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) {
      throw csv::IoError(path.string() + ": ragged row");
    }
    x1.push_back(csv::parse_real(row[ia]));
    x1.push_back(csv::parse_real(row[ib]));
    x2.push_back(static_cast<int>(csv::parse_int(row[il])));
  }
  return MultimodalDataset(std::move(x1), std::move(x2));
}

double gaussian_log_likelihood(const Tensor& rows, std::span<const double> mean,
                               std::span<const double> variance) {
  const std::size_t n = rows.rows(), d = rows.cols();
  if (mean.size() != d || variance.size() != d) {
    throw ShapeError("gaussian_log_likelihood: parameter dimension mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double r = rows(i, j) - mean[j];
      total += -0.5 * std::log(2.0 * std::numbers::pi * variance[j]) -
               0.5 * r * r / variance[j];
    }
  }
  return total;
}

MleSolution gaussian_mle(const Tensor& rows) {
  if (rows.shape().size() != 2 || rows.rows() == 0) {
    throw std::invalid_argument("gaussian_mle: no data points");
  }
  const std::size_t n = rows.rows(), d = rows.cols();
  MleSolution mle;
  mle.family = MleFamily::kGaussianDiag;
  mle.count = n;
  mle.mean.assign(d, 0.0);
  mle.variance.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mle.mean[j] += rows(i, j);
  for (double& m : mle.mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double r = rows(i, j) - mle.mean[j];
      mle.variance[j] += r * r;
    }
  }
  for (double& v : mle.variance) {
    v /= static_cast<double>(n);
    if (v < kVarianceFloor) {
      v = kVarianceFloor;
      mle.variance_floored = true;
    }
  }
  mle.log_likelihood = gaussian_log_likelihood(rows, mle.mean, mle.variance);
  return mle;
}

MleSolution categorical_mle(std::span<const int> labels, std::size_t num_classes) {
  if (labels.empty()) throw std::invalid_argument("categorical_mle: no labels");
  if (num_classes < 2) throw std::invalid_argument("categorical_mle: need C >= 2");
  MleSolution mle;
  mle.family = MleFamily::kCategorical;
  mle.count = labels.size();
  mle.probabilities.assign(num_classes, 0.0);
  for (int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= num_classes) {
      throw DomainError("categorical_mle: label out of range");
    }
    mle.probabilities[static_cast<std::size_t>(label)] += 1.0;
  }
  const double n = static_cast<double>(labels.size());
  for (double& p : mle.probabilities) p /= n;
  for (int label : labels) {
    mle.log_likelihood += std::log(mle.probabilities[static_cast<std::size_t>(label)]);
  }
  return mle;
}

MleSolution class_mle(const MultimodalDataset& ds, int label, MleFamily family) {
  const auto rows = ds.class_indices(label);
  if (rows.empty()) {
    throw std::invalid_argument("class_mle: class " + std::to_string(label) + " is empty");
  }
  if (family == MleFamily::kGaussianDiag) return gaussian_mle(ds.x1_rows(rows));
  std::vector<int> labels;
  labels.reserve(rows.size());
  for (std::size_t r : rows) labels.push_back(ds.x2()[r]);
  return categorical_mle(labels, ds.num_classes());
}

}  // namespace mmvae::data
