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

#include <string>
#include <utility>
#include <vector>

#include "mmvae/datagen.hpp"
#include "mmvae/models.hpp"
#include "mmvae/random.hpp"

namespace mmvae::objectives {

// One tensor per modality (continuous rows, or one-hot rows for categorical
// modalities), all with the same number of rows.
struct Batch {
  std::vector<Tensor> modalities;
  std::vector<int> labels;  // raw labels of the last modality

  std::size_t size() const { return modalities.empty() ? 0 : modalities.front().rows(); }

  static Batch FromDataset(const data::MultimodalDataset& ds,
                           std::span<const std::size_t> rows);
  static Batch FromDataset(const data::MultimodalDataset& ds);
};

// A Monte-Carlo objective value summed over the batch rows. `per_term`
// entries are batch sums of single expectations; see each estimator for how
// they combine into `total`.
struct ElboEstimate {
  Tensor total_tensor;  // on the tape when the view was bound
  double total = 0.0;
  std::vector<std::pair<std::string, double>> per_term;
  std::size_t mc_samples = 0;

  double term(const std::string& name) const;
};

// Stratified-sampling bound of the mixture-of-experts model:
//
//   total = (1/M) sum_m E_{q(g|x_m)}[ log p(g) + sum_i log p(x_i|g)
//                                     - log q(g|x_1..x_M) ]
//
// with q(g|x_1..x_M) the uniform mixture of experts and K reparameterized
// samples per expert. For each expert m (named by its modality, e.g.
// "q(x1)") the per-term entries are
//   log_prior|q(xm), neg_log_q|q(xm), recon_xi|q(xm) for every i,
// and total == (1/M) * sum of all entries. The entries recon_xi|q(xM) under
// the label expert are the cross-modal reconstruction terms that drive mean
// collapse.
//
// Noise is drawn expert by expert, K*B x latent_dim each.
ElboEstimate mmvae_elbo(const model::ModelView& view, const Batch& batch, std::size_t K,
                        NoiseSource& noise);

// Plain single-encoder ELBO E_q[log p(x|g) + log p(g) - log q(g|x)] for a
// one-modality assembly. Reference for the M = 1 case of mmvae_elbo.
ElboEstimate single_modality_elbo(const model::ModelView& view, const Batch& batch,
                                  std::size_t K, NoiseSource& noise);

// Sum of three ELBOs: all modalities jointly plus each modality alone. Each
// ELBO uses the product-of-experts posterior with the prior expert included,
// an analytic KL to the prior, and K reparameterized reconstruction samples.
// Entries per subset S (e.g. "[x1+x2]"): elbo S, kl S, recon_xi S, with
// elbo = sum_i recon_xi - kl and total == sum of the elbo entries.
ElboEstimate mvae_objective(const model::ModelView& view, const Batch& batch,
                            std::size_t K, NoiseSource& noise);

// Dispatches on the model kind.
ElboEstimate objective(const model::ModelView& view, const Batch& batch, std::size_t K,
                       NoiseSource& noise);

struct LmEstimate {
  double value = 0.0;
  double standard_error = 0.0;
  std::size_t draws = 0;
};

// sum_n E_{r_M(g|x_M^(n))}[log f_m(x_m^(n) | tau_m(g))] over a slice whose
// rows all carry the same label, estimated with K independent draws per
// row. The standard error is N * sd / sqrt(N K) with sd pooled over all
// N*K per-draw log-likelihoods. Throws std::invalid_argument on mixed
// labels.
LmEstimate surrogate_lm(const model::ModelView& view, const Batch& class_slice,
                        std::size_t m, std::size_t K, NoiseSource& noise);

// The posterior the model uses when only modality m is observed:
// the expert itself for the mixture model, expert times prior for the
// product model.
dist::DiagGaussianParams unimodal_posterior(const model::ModelView& view, std::size_t m,
                                            const Tensor& x);

}  // namespace mmvae::objectives
