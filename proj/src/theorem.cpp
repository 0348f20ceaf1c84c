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

#include "mmvae/theorem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mmvae/csv.hpp"
#include "mmvae/objectives.hpp"
#include "mmvae/random.hpp"

namespace mmvae::theorem {

using model::ModalityKind;
using model::MultimodalVae;

namespace {

constexpr double kTrialScales[] = {0.1, 1.0, 10.0};
constexpr std::uint64_t kNoiseStream = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kBiasStream = 0xD1B54A32D192ED03ULL;

// Gap check with a relative slack for the two summation orders used by the
// bound and the estimator.
bool WithinTolerance(double gap, double stderr, double bound) {
  const double slack = 1e-9 * std::max(1.0, std::abs(bound));
  return gap >= -(kStderrTolerance * stderr + slack);
}

TrialRecord EvaluateTrial(const MultimodalVae& vae, const objectives::Batch& slice,
                          std::size_t m, std::size_t K, std::uint64_t noise_seed,
                          double bound) {
  NoiseSource noise(noise_seed ^ kNoiseStream);
  const objectives::LmEstimate lm = objectives::surrogate_lm(vae.view(), slice, m, K, noise);
  TrialRecord rec;
  rec.model_lm = lm.value;
  rec.standard_error = lm.standard_error;
  rec.gap = bound - lm.value;
  rec.violated = !WithinTolerance(rec.gap, lm.standard_error, bound);
  return rec;
}

void Persist(TrialRecord& rec, const MultimodalVae& vae, const VerifyOptions& options,
             int c, std::size_t m) {
  if (!options.failure_dir) return;
  std::filesystem::create_directories(*options.failure_dir);
  const std::string stem = "failed_c" + std::to_string(c) + "_m" + std::to_string(m) + "_" +
                           rec.kind + "_" + std::to_string(rec.trial);
  const auto ckpt = *options.failure_dir / (stem + "_checkpoint.txt");
  vae.parameters().save(ckpt);
  csv::write_text(*options.failure_dir / (stem + "_config.txt"),
                  model::config_to_text(vae.config()));
  rec.checkpoint = ckpt.string();
}

}  // namespace

data::MleSolution modality_mle(const data::MultimodalDataset& ds, int c, std::size_t m) {
  return data::class_mle(ds, c,
                         m == 0 ? data::MleFamily::kGaussianDiag
                                : data::MleFamily::kCategorical);
}

double analytic_bound(const data::MultimodalDataset& ds, int c, std::size_t m) {
  return modality_mle(ds, c, m).log_likelihood;
}

std::size_t TheoremReport::violations() const {
  return static_cast<std::size_t>(
      std::count_if(trials.begin(), trials.end(), [](const auto& t) { return t.violated; }));
}

double TheoremReport::min_normalized_gap() const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& t : trials) {
    if (t.standard_error > 0.0) best = std::min(best, t.gap / t.standard_error);
  }
  return best;
}

MultimodalVae random_trial_model(const model::ArchitectureOptions& arch,
                                 std::uint64_t seed, std::size_t trial) {
  model::ArchitectureOptions a = arch;
  a.seed = seed + trial;
  MultimodalVae vae = MultimodalVae::init(model::ModelConfig::Make(model::ModelKind::kMmvae, a));
  const double weight_scale = kTrialScales[trial % 3];
  NoiseSource rng((seed + trial) ^ kBiasStream);
  for (std::size_t i = 0; i < vae.parameters().size(); ++i) {
    auto& p = vae.parameters()[i];
    const bool is_bias = p.name.ends_with(".bias");
    for (double& v : p.values) v = is_bias ? 0.5 * rng.normal() : v * weight_scale;
  }
  return vae;
}

TheoremReport verify_theorem(const data::MultimodalDataset& ds, int c, std::size_t m,
                             const VerifyOptions& options) {
  if (options.trials < 1) throw std::invalid_argument("verify_theorem: trials must be >= 1");
  if (m > 1) throw std::out_of_range("verify_theorem: modality must be 0 or 1");
  TheoremReport report;
  report.class_label = c;
  report.modality = m;
  report.mle = modality_mle(ds, c, m);
  report.analytic_bound = report.mle.log_likelihood;
  report.mle_perturbation = options.perturb_mle;

  const auto rows = ds.class_indices(c);
  const objectives::Batch slice = objectives::Batch::FromDataset(ds, rows);

  // Equality case: decoder constant at the MLE (optionally shifted).
  {
    MultimodalVae vae = MultimodalVae::init(
        model::ModelConfig::Make(model::ModelKind::kMmvae, [&] {
          auto a = options.architecture;
          a.seed = options.seed;
          return a;
        }()));
    model::ConstantTarget target = model::ConstantTarget::FromMle(report.mle);
    for (double& mu : target.mean) mu += options.perturb_mle;
    model::set_constant_decoder(vae, m, target);
    TrialRecord rec = EvaluateTrial(vae, slice, m, options.mc_samples, options.seed,
                                    report.analytic_bound);
    rec.kind = "equality";
    rec.seed = options.seed;
    rec.violated = std::abs(rec.gap) >
                   kStderrTolerance * rec.standard_error +
                       1e-9 * std::max(1.0, std::abs(report.analytic_bound));
    if (rec.violated) Persist(rec, vae, options, c, m);
    report.equality = rec;
  }

  for (std::size_t i = 0; i < options.trials; ++i) {
    const MultimodalVae vae = random_trial_model(options.architecture, options.seed, i);
    TrialRecord rec = EvaluateTrial(vae, slice, m, options.mc_samples, options.seed + i,
                                    report.analytic_bound);
    rec.trial = i;
    rec.kind = "random";
    rec.seed = options.seed + i;
    rec.weight_scale = kTrialScales[i % 3];
    if (rec.violated) Persist(rec, vae, options, c, m);
    report.trials.push_back(std::move(rec));
  }
  for (std::size_t j = 0; j < options.extra_models.size(); ++j) {
    const MultimodalVae& vae = *options.extra_models[j];
    TrialRecord rec = EvaluateTrial(vae, slice, m, options.mc_samples,
                                    options.seed + options.trials + j, report.analytic_bound);
    rec.trial = options.trials + j;
    rec.kind = "checkpoint";
    rec.seed = options.seed + options.trials + j;
    if (rec.violated) Persist(rec, vae, options, c, m);
    report.trials.push_back(std::move(rec));
  }

  report.failed = report.equality.violated || report.violations() > 0;
  return report;
}

std::string to_csv(const TheoremReport& report) {
  std::string out =
      "class,modality,trial,kind,seed,weight_scale,model_lm,stderr,analytic_bound,gap,status\n";
  auto row = [&](const TrialRecord& t) {
    out += std::to_string(report.class_label) + ',' + std::to_string(report.modality) + ',' +
           std::to_string(t.trial) + ',' + t.kind + ',' + std::to_string(t.seed) + ',' +
           csv::format_real(t.weight_scale) + ',' + csv::format_real(t.model_lm) + ',' +
           csv::format_real(t.standard_error) + ',' + csv::format_real(report.analytic_bound) +
           ',' + csv::format_real(t.gap) + ',' + (t.violated ? "FAILED" : "ok") + '\n';
  };
  row(report.equality);
  for (const auto& t : report.trials) row(t);
  return out;
}

MomentComparison compare_moments(const Tensor& samples, const Tensor& data) {
  if (samples.cols() != data.cols()) throw ShapeError("compare_moments: dimension mismatch");
  if (samples.rows() == 0 || data.rows() == 0) {
    throw std::invalid_argument("compare_moments: empty input");
  }
  auto moments = [](const Tensor& t) {
    const std::size_t n = t.rows(), d = t.cols();
    std::vector<double> mean(d, 0.0), var(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) mean[j] += t(i, j);
    for (double& v : mean) v /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        const double r = t(i, j) - mean[j];
        var[j] += r * r;
      }
    }
    for (double& v : var) v /= static_cast<double>(n);
    return std::pair{mean, var};
  };
  const auto [sm, sv] = moments(samples);
  const auto [dm, dv] = moments(data);
  MomentComparison out;
  double sq = 0.0;
  for (std::size_t j = 0; j < sm.size(); ++j) {
    sq += (sm[j] - dm[j]) * (sm[j] - dm[j]);
    out.variance_ratio.push_back(dv[j] > 0.0 ? sv[j] / dv[j] : 0.0);
  }
  out.mean_error = std::sqrt(sq);
  return out;
}

CollapseReport collapse_metrics(const MultimodalVae& vae, const data::MultimodalDataset& ds,
                                std::size_t n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw std::invalid_argument("collapse_metrics: n_samples must be >= 1");
  const model::ModelView view = vae.view();
  const std::size_t label_m = vae.label_modality();
  const std::size_t C = vae.config().modalities.at(label_m).dim;
  const std::size_t D = vae.latent_dim();
  NoiseSource noise(seed);
  CollapseReport report;
  for (std::size_t c = 0; c < C; ++c) {
    const auto rows = ds.class_indices(static_cast<int>(c));
    if (rows.empty()) continue;
    std::vector<double> one_hot(n_samples * C, 0.0);
    for (std::size_t i = 0; i < n_samples; ++i) one_hot[i * C + c] = 1.0;
    const Tensor labels({n_samples, C}, std::move(one_hot));
    const auto posterior = objectives::unimodal_posterior(view, label_m, labels);
    const Tensor g = dist::rsample(posterior, noise.standard_normal(n_samples, D));
    const auto decoded = std::get<dist::DiagGaussianParams>(view.decode(0, g));
    const Tensor x = dist::rsample(decoded, noise.standard_normal(n_samples, decoded.dim()));

    const Tensor data = ds.x1_rows(rows);
    const MomentComparison means = compare_moments(decoded.mean, data);
    const MomentComparison sampled = compare_moments(x, data);
    report.classes.push_back({static_cast<int>(c), n_samples, means.mean_error,
                              means.variance_ratio, sampled.mean_error,
                              sampled.variance_ratio});
  }
  return report;
}

std::string to_csv(const CollapseReport& report) {
  std::string out =
      "label,n_samples,mean_error,var_ratio_a,var_ratio_b,sampled_mean_error,"
      "sampled_var_ratio_a,sampled_var_ratio_b\n";
  for (const auto& c : report.classes) {
    out += std::to_string(c.label) + ',' + std::to_string(c.n_samples) + ',' +
           csv::format_real(c.mean_error) + ',' + csv::join_reals(c.variance_ratio) + ',' +
           csv::format_real(c.sampled_mean_error) + ',' +
           csv::join_reals(c.sampled_variance_ratio) + '\n';
  }
  return out;
}

double cross_modal_label_accuracy(const MultimodalVae& vae, const data::MultimodalDataset& ds,
                                  std::uint64_t seed) {
  const model::ModelView view = vae.view();
  NoiseSource noise(seed);
  const auto posterior = objectives::unimodal_posterior(view, 0, ds.x1_all());
  const Tensor g = dist::rsample(posterior, noise.standard_normal(ds.size(), vae.latent_dim()));
  const auto logits =
      std::get<dist::CategoricalParams>(view.decode(vae.label_modality(), g)).logits;
  std::size_t correct = 0;
  for (std::size_t n = 0; n < ds.size(); ++n) {
    const auto row = logits.row(n);
    const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best == ds.x2()[n]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

}  // namespace mmvae::theorem
