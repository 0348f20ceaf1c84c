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

#include <span>
#include <vector>

#include "mmvae/tensor.hpp"

namespace mmvae::dist {

// Bounds applied to every log-std head.
inline constexpr double kLogStdMin = -10.0;
inline constexpr double kLogStdMax = 10.0;

// A batch of diagonal Gaussians: row i of `mean` and `log_std` describes
// distribution i. Both are B x D.
struct DiagGaussianParams {
  Tensor mean;
  Tensor log_std;

  std::size_t batch() const { return mean.rows(); }
  std::size_t dim() const { return mean.cols(); }
  Tensor std() const;
  Tensor variance() const;

  // Throws ShapeError on mismatched shapes, NonFiniteError on NaN/Inf.
  void validate() const;

  static DiagGaussianParams StandardNormal(std::size_t batch, std::size_t dim);
  // Single distribution (batch 1) from plain vectors of mean and std.
  static DiagGaussianParams FromMeanStd(std::span<const double> mean,
                                        std::span<const double> std);
};

// A batch of categoricals over C >= 2 classes; `logits` is B x C.
struct CategoricalParams {
  Tensor logits;

  std::size_t batch() const { return logits.rows(); }
  std::size_t num_classes() const { return logits.cols(); }
  Tensor probabilities() const;
  void validate() const;
};

// Uniform mixture over M >= 1 components of equal shape.
class MoEPosterior {
 public:
  explicit MoEPosterior(std::vector<DiagGaussianParams> components);
  const std::vector<DiagGaussianParams>& components() const { return components_; }
  std::size_t size() const { return components_.size(); }
  double weight() const { return 1.0 / static_cast<double>(components_.size()); }

 private:
  std::vector<DiagGaussianParams> components_;
};

// Renormalized product of Gaussian experts.
struct PoEPosterior {
  DiagGaussianParams fused;
};

// All log densities return a B x 1 column, one value per batch row.

Tensor gaussian_log_prob(const Tensor& x, const DiagGaussianParams& p);
Tensor standard_normal_log_prob(const Tensor& x);
// `one_hot` is B x C.
Tensor categorical_log_prob(const Tensor& one_hot, const CategoricalParams& p);
// Single-row convenience: log softmax(logits)[label] for a batch-1 `p`.
double categorical_log_prob(std::size_t label, const CategoricalParams& p);

// mean + exp(log_std) * noise, differentiable in the parameters.
Tensor rsample(const DiagGaussianParams& p, const Tensor& noise);

Tensor kl_diag_gaussian(const DiagGaussianParams& q, const DiagGaussianParams& p);
Tensor kl_to_standard_normal(const DiagGaussianParams& q);

// Precision-weighted fusion; the standard-normal prior is added as one more
// expert when `include_prior` is set. Throws std::invalid_argument on an
// empty expert list.
PoEPosterior poe_fuse(std::span<const DiagGaussianParams> experts,
                      bool include_prior);

// log (1/M) sum_m N(g | component m), evaluated with a max-shifted
// log-sum-exp.
Tensor moe_log_prob(const Tensor& g, const MoEPosterior& mixture);

// Stacks `times` copies of every row block (see tile_rows).
DiagGaussianParams tile(const DiagGaussianParams& p, std::size_t times);
CategoricalParams tile(const CategoricalParams& p, std::size_t times);

}  // namespace mmvae::dist
