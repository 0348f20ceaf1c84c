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

#include "mmvae/distributions.hpp"

#include <cmath>
#include <numbers>

namespace mmvae::dist {
namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2 pi)

void RequireSameShape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": dimension mismatch " +
                     ShapeToString(a.shape()) + " vs " + ShapeToString(b.shape()));
  }
}

}  // namespace

Tensor DiagGaussianParams::std() const { return exp(log_std); }

Tensor DiagGaussianParams::variance() const { return exp(scale(log_std, 2.0)); }

void DiagGaussianParams::validate() const {
  RequireSameShape("DiagGaussianParams", mean, log_std);
  require_finite(mean, "DiagGaussianParams.mean");
  require_finite(log_std, "DiagGaussianParams.log_std");
}

DiagGaussianParams DiagGaussianParams::StandardNormal(std::size_t batch,
                                                      std::size_t dim) {
  return {Tensor::Zeros(batch, dim), Tensor::Zeros(batch, dim)};
}

DiagGaussianParams DiagGaussianParams::FromMeanStd(std::span<const double> mean,
                                                   std::span<const double> std) {
  if (mean.size() != std.size()) {
    throw ShapeError("FromMeanStd: mean has " + std::to_string(mean.size()) +
                     " entries, std has " + std::to_string(std.size()));
  }
  std::vector<double> log_std(std.size());
  for (std::size_t i = 0; i < std.size(); ++i) {
    if (!(std[i] > 0.0)) throw DomainError("FromMeanStd: std must be positive");
    log_std[i] = std::log(std[i]);
  }
  return {Tensor::RowVector(mean), Tensor::RowVector(log_std)};
}

Tensor CategoricalParams::probabilities() const {
  return exp(log_softmax_rows(logits));
}

void CategoricalParams::validate() const {
  if (logits.shape().size() != 2 || logits.cols() < 2) {
    throw ShapeError("CategoricalParams: need at least 2 classes, logits shape " +
                     ShapeToString(logits.shape()));
  }
  require_finite(logits, "CategoricalParams.logits");
}

MoEPosterior::MoEPosterior(std::vector<DiagGaussianParams> components)
    : components_(std::move(components)) {
  if (components_.empty()) {
    throw std::invalid_argument("MoEPosterior: needs at least one component");
  }
  for (const auto& c : components_) {
    c.validate();
    RequireSameShape("MoEPosterior", components_.front().mean, c.mean);
  }
}

Tensor gaussian_log_prob(const Tensor& x, const DiagGaussianParams& p) {
  RequireSameShape("gaussian_log_prob", x, p.mean);
  RequireSameShape("gaussian_log_prob", x, p.log_std);
  const double dim = static_cast<double>(x.cols());
  const Tensor z = mul(sub(x, p.mean), exp(neg(p.log_std)));
  const Tensor per_dim = sub(scale(square(z), -0.5), p.log_std);
  return add_scalar(row_sum(per_dim), -dim * kHalfLog2Pi);
}

Tensor standard_normal_log_prob(const Tensor& x) {
  const double dim = static_cast<double>(x.cols());
  return add_scalar(scale(row_sum(square(x)), -0.5), -dim * kHalfLog2Pi);
}

Tensor categorical_log_prob(const Tensor& one_hot, const CategoricalParams& p) {
  RequireSameShape("categorical_log_prob", one_hot, p.logits);
  return row_sum(mul(one_hot, log_softmax_rows(p.logits)));
}

double categorical_log_prob(std::size_t label, const CategoricalParams& p) {
  p.validate();
  if (label >= p.num_classes()) {
    throw DomainError("categorical_log_prob: label " + std::to_string(label) +
                      " out of range for " + std::to_string(p.num_classes()) +
                      " classes");
  }
  return log_softmax_rows(p.logits.detach())(0, label);
}

Tensor rsample(const DiagGaussianParams& p, const Tensor& noise) {
  RequireSameShape("rsample", p.mean, noise);
  return add(p.mean, mul(exp(p.log_std), noise));
}

Tensor kl_diag_gaussian(const DiagGaussianParams& q, const DiagGaussianParams& p) {
  RequireSameShape("kl_diag_gaussian", q.mean, p.mean);
  RequireSameShape("kl_diag_gaussian", q.log_std, p.log_std);
  // log sp - log sq + (sq^2 + (mq - mp)^2) / (2 sp^2) - 1/2, summed over dims
  const Tensor inv_var_p = exp(scale(p.log_std, -2.0));
  const Tensor var_q = exp(scale(q.log_std, 2.0));
  const Tensor quad = mul(add(var_q, square(sub(q.mean, p.mean))), inv_var_p);
  const Tensor per_dim = add_scalar(add(sub(p.log_std, q.log_std), scale(quad, 0.5)), -0.5);
  return row_sum(per_dim);
}

Tensor kl_to_standard_normal(const DiagGaussianParams& q) {
  // 0.5 * (mu^2 + s^2 - 1 - 2 log s)
  const Tensor per_dim = add_scalar(
      scale(sub(add(square(q.mean), exp(scale(q.log_std, 2.0))), scale(q.log_std, 2.0)),
            0.5),
      -0.5);
  return row_sum(per_dim);
}

PoEPosterior poe_fuse(std::span<const DiagGaussianParams> experts,
                      bool include_prior) {
  if (experts.empty()) throw std::invalid_argument("poe_fuse: empty expert list");
  const Shape& shape = experts.front().mean.shape();
  for (const auto& e : experts) {
    RequireSameShape("poe_fuse", experts.front().mean, e.mean);
    RequireSameShape("poe_fuse", e.mean, e.log_std);
  }

  std::optional<Tensor> total_precision;
  std::optional<Tensor> weighted_mean;
  for (const auto& e : experts) {
    const Tensor precision = exp(scale(e.log_std, -2.0));
    const Tensor pm = mul(precision, e.mean);
    total_precision = total_precision ? add(*total_precision, precision) : precision;
    weighted_mean = weighted_mean ? add(*weighted_mean, pm) : pm;
  }
  if (include_prior) total_precision = add_scalar(*total_precision, 1.0);

  PoEPosterior out{{div(*weighted_mean, *total_precision),
                    scale(log(*total_precision), -0.5)}};

  // fused precision must equal the sum of expert precisions
  const auto fused_ls = out.fused.log_std.data();
  const auto expected = total_precision->data();
  for (std::size_t i = 0; i < ShapeSize(shape); ++i) {
    const double got = std::exp(-2.0 * fused_ls[i]);
    if (std::abs(got - expected[i]) > 1e-10 * expected[i]) {
      throw std::logic_error("poe_fuse: fused precision does not match expert sum");
    }
  }
  return out;
}

Tensor moe_log_prob(const Tensor& g, const MoEPosterior& mixture) {
  std::vector<Tensor> per_component;
  per_component.reserve(mixture.size());
  for (const auto& c : mixture.components()) {
    per_component.push_back(gaussian_log_prob(g, c));
  }
  if (per_component.size() == 1) return per_component.front();
  return add_scalar(logsumexp_rows(concat_cols(per_component)),
                    -std::log(static_cast<double>(mixture.size())));
}

DiagGaussianParams tile(const DiagGaussianParams& p, std::size_t times) {
  return {tile_rows(p.mean, times), tile_rows(p.log_std, times)};
}

CategoricalParams tile(const CategoricalParams& p, std::size_t times) {
  return {tile_rows(p.logits, times)};
}

}  // namespace mmvae::dist
