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

#include "mmvae/objectives.hpp"

#include <cmath>
#include <numeric>
#include <optional>

namespace mmvae::objectives {

using dist::DiagGaussianParams;
using model::ModelView;

namespace {

// Evaluates `fn`, re-labelling any NaN/Inf failure with the term name.
template <typename F>
Tensor Term(const std::string& name, F fn) {
  try {
    Tensor t = fn();
    require_finite(t, name);
    return t;
  } catch (const NonFiniteError& e) {
    throw NonFiniteError("term " + name + ": " + e.what());
  }
}

void RequireK(std::size_t K) {
  if (K < 1) throw std::invalid_argument("need at least one Monte-Carlo sample (K >= 1)");
}

void RequireBatch(const ModelView& view, const Batch& batch) {
  if (batch.modalities.size() != view.vae().num_modalities()) {
    throw std::invalid_argument("batch has " + std::to_string(batch.modalities.size()) +
                                " modalities, model has " +
                                std::to_string(view.vae().num_modalities()));
  }
  if (batch.size() == 0) throw std::invalid_argument("empty batch");
}

const std::string& ModalityName(const ModelView& view, std::size_t m) {
  return view.vae().config().modalities.at(m).name;
}

}  // namespace

Batch Batch::FromDataset(const data::MultimodalDataset& ds,
                         std::span<const std::size_t> rows) {
  Batch b;
  b.modalities.push_back(ds.x1_rows(rows));
  b.modalities.push_back(ds.x2_one_hot(rows));
  b.labels.reserve(rows.size());
  for (std::size_t r : rows) b.labels.push_back(ds.x2()[r]);
  return b;
}

Batch Batch::FromDataset(const data::MultimodalDataset& ds) {
  std::vector<std::size_t> rows(ds.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return FromDataset(ds, rows);
}

double ElboEstimate::term(const std::string& name) const {
  for (const auto& [n, v] : per_term) {
    if (n == name) return v;
  }
  throw std::out_of_range("no term named '" + name + "'");
}

ElboEstimate mmvae_elbo(const ModelView& view, const Batch& batch, std::size_t K,
                        NoiseSource& noise) {
  RequireK(K);
  RequireBatch(view, batch);
  if (view.vae().kind() != model::ModelKind::kMmvae) {
    throw std::invalid_argument("mmvae_elbo needs a mixture-of-experts model");
  }
  const std::size_t M = view.vae().num_modalities();
  const std::size_t B = batch.size();
  const std::size_t D = view.vae().latent_dim();
  const double inv_k = 1.0 / static_cast<double>(K);

  std::vector<DiagGaussianParams> experts;
  std::vector<DiagGaussianParams> tiled_experts;
  std::vector<Tensor> tiled_x;
  for (std::size_t m = 0; m < M; ++m) {
    experts.push_back(view.encode(m, batch.modalities[m]));
    tiled_experts.push_back(dist::tile(experts.back(), K));
    tiled_x.push_back(tile_rows(batch.modalities[m], K));
  }
  const dist::MoEPosterior mixture(tiled_experts);

  ElboEstimate est;
  est.mc_samples = K;
  std::optional<Tensor> total;
  for (std::size_t m = 0; m < M; ++m) {
    const std::string expert = "|q(" + ModalityName(view, m) + ")";
    const Tensor g =
        Term("sample" + expert,
             [&] { return dist::rsample(tiled_experts[m], noise.standard_normal(K * B, D)); });
    const Tensor log_prior =
        Term("log_prior" + expert, [&] { return dist::standard_normal_log_prob(g); });
    const Tensor log_q =
        Term("neg_log_q" + expert, [&] { return dist::moe_log_prob(g, mixture); });

    Tensor joint = sub(log_prior, log_q);
    est.per_term.emplace_back("log_prior" + expert, sum(log_prior).item() * inv_k);
    est.per_term.emplace_back("neg_log_q" + expert, -sum(log_q).item() * inv_k);
    for (std::size_t i = 0; i < M; ++i) {
      const std::string name = "recon_" + ModalityName(view, i) + expert;
      const Tensor recon = Term(
          name, [&] { return model::log_likelihood(view.decode(i, g), tiled_x[i]); });
      joint = add(joint, recon);
      est.per_term.emplace_back(name, sum(recon).item() * inv_k);
    }
    const Tensor contribution = scale(sum(joint), inv_k);
    total = total ? add(*total, contribution) : contribution;
  }
  est.total_tensor = scale(*total, 1.0 / static_cast<double>(M));
  est.total = est.total_tensor.item();
  return est;
}

ElboEstimate single_modality_elbo(const ModelView& view, const Batch& batch,
                                  std::size_t K, NoiseSource& noise) {
  RequireK(K);
  RequireBatch(view, batch);
  if (view.vae().num_modalities() != 1) {
    throw std::invalid_argument("single_modality_elbo needs a one-modality model");
  }
  const std::size_t B = batch.size();
  const std::size_t D = view.vae().latent_dim();
  const double inv_k = 1.0 / static_cast<double>(K);

  const DiagGaussianParams q = dist::tile(view.encode(0, batch.modalities[0]), K);
  const Tensor x = tile_rows(batch.modalities[0], K);
  const Tensor g = dist::rsample(q, noise.standard_normal(K * B, D));
  const Tensor log_prior = dist::standard_normal_log_prob(g);
  const Tensor log_q = dist::gaussian_log_prob(g, q);
  const Tensor recon = model::log_likelihood(view.decode(0, g), x);

  ElboEstimate est;
  est.mc_samples = K;
  est.total_tensor = scale(sum(add(sub(log_prior, log_q), recon)), inv_k);
  est.total = est.total_tensor.item();
  require_finite(est.total_tensor, "single_modality_elbo");
  est.per_term = {{"log_prior", sum(log_prior).item() * inv_k},
                  {"neg_log_q", -sum(log_q).item() * inv_k},
                  {"recon", sum(recon).item() * inv_k}};
  return est;
}

ElboEstimate mvae_objective(const ModelView& view, const Batch& batch, std::size_t K,
                            NoiseSource& noise) {
  RequireK(K);
  RequireBatch(view, batch);
  if (view.vae().kind() != model::ModelKind::kMvae) {
    throw std::invalid_argument("mvae_objective needs a product-of-experts model");
  }
  const std::size_t M = view.vae().num_modalities();
  const std::size_t B = batch.size();
  const std::size_t D = view.vae().latent_dim();
  const double inv_k = 1.0 / static_cast<double>(K);

  std::vector<DiagGaussianParams> experts;
  std::vector<Tensor> tiled_x;
  for (std::size_t m = 0; m < M; ++m) {
    experts.push_back(view.encode(m, batch.modalities[m]));
    tiled_x.push_back(tile_rows(batch.modalities[m], K));
  }

  // The joint subset, then each modality alone.
  std::vector<std::vector<std::size_t>> subsets;
  std::vector<std::size_t> all(M);
  std::iota(all.begin(), all.end(), std::size_t{0});
  subsets.push_back(all);
  if (M > 1) {
    for (std::size_t m = 0; m < M; ++m) subsets.push_back({m});
  }

  ElboEstimate est;
  est.mc_samples = K;
  std::optional<Tensor> total;
  for (const auto& subset : subsets) {
    std::string label = "[";
    std::vector<DiagGaussianParams> chosen;
    for (std::size_t k = 0; k < subset.size(); ++k) {
      label += (k ? "+" : "") + ModalityName(view, subset[k]);
      chosen.push_back(experts[subset[k]]);
    }
    label += "]";

    const DiagGaussianParams posterior = dist::poe_fuse(chosen, true).fused;
    const Tensor kl =
        Term("kl" + label, [&] { return sum(dist::kl_to_standard_normal(posterior)); });
    const Tensor g = Term("sample" + label, [&] {
      return dist::rsample(dist::tile(posterior, K), noise.standard_normal(K * B, D));
    });
    std::optional<Tensor> recon_total;
    std::vector<std::pair<std::string, double>> recon_terms;
    for (std::size_t m : subset) {
      const std::string name = "recon_" + ModalityName(view, m) + label;
      const Tensor recon = Term(name, [&] {
        return scale(sum(model::log_likelihood(view.decode(m, g), tiled_x[m])), inv_k);
      });
      recon_total = recon_total ? add(*recon_total, recon) : recon;
      recon_terms.emplace_back(name, recon.item());
    }
    const Tensor elbo = sub(*recon_total, kl);
    est.per_term.emplace_back("elbo" + label, elbo.item());
    est.per_term.emplace_back("kl" + label, kl.item());
    est.per_term.insert(est.per_term.end(), recon_terms.begin(), recon_terms.end());
    total = total ? add(*total, elbo) : elbo;
  }
  est.total_tensor = *total;
  est.total = est.total_tensor.item();
  return est;
}

ElboEstimate objective(const ModelView& view, const Batch& batch, std::size_t K,
                       NoiseSource& noise) {
  return view.vae().kind() == model::ModelKind::kMmvae ? mmvae_elbo(view, batch, K, noise)
                                                       : mvae_objective(view, batch, K, noise);
}

LmEstimate surrogate_lm(const ModelView& view, const Batch& class_slice, std::size_t m,
                        std::size_t K, NoiseSource& noise) {
  RequireK(K);
  RequireBatch(view, class_slice);
  if (m >= view.vae().num_modalities()) throw std::out_of_range("modality index");
  for (int label : class_slice.labels) {
    if (label != class_slice.labels.front()) {
      throw std::invalid_argument("surrogate_lm: slice mixes labels " +
                                  std::to_string(class_slice.labels.front()) + " and " +
                                  std::to_string(label));
    }
  }
  const std::size_t label_m = view.vae().label_modality();
  const std::size_t N = class_slice.size();
  const std::size_t D = view.vae().latent_dim();

  const DiagGaussianParams r =
      dist::tile(view.encode(label_m, class_slice.modalities[label_m]), K);
  const Tensor g = dist::rsample(r, noise.standard_normal(K * N, D));
  const Tensor draws =
      model::log_likelihood(view.decode(m, g), tile_rows(class_slice.modalities[m], K));
  require_finite(draws, "surrogate_lm");

  const auto v = draws.data();
  const double count = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= count;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double var = v.size() > 1 ? ss / (count - 1.0) : 0.0;

  LmEstimate est;
  est.draws = v.size();
  double total = 0.0;
  for (double x : v) total += x;
  est.value = total / static_cast<double>(K);
  est.standard_error = static_cast<double>(N) * std::sqrt(var / count);
  return est;
}

DiagGaussianParams unimodal_posterior(const ModelView& view, std::size_t m,
                                      const Tensor& x) {
  DiagGaussianParams expert = view.encode(m, x);
  if (view.vae().kind() == model::ModelKind::kMmvae) return expert;
  const DiagGaussianParams experts[] = {expert};
  return dist::poe_fuse(experts, true).fused;
}

}  // namespace mmvae::objectives
