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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mmvae/datagen.hpp"
#include "mmvae/models.hpp"

namespace mmvae::theorem {

// Number of Monte-Carlo standard errors a gap may fall below zero before a
// trial counts as a violation.
inline constexpr double kStderrTolerance = 3.0;

// MLE for modality m over class c: gaussian for continuous x1, categorical
// for the label modality.
data::MleSolution modality_mle(const data::MultimodalDataset& ds, int c, std::size_t m);

// sum_{n in S_c} log f_m(x_m^(n) | tau_hat_m): the value of the surrogate
// objective for a decoder that is constant in g at the class MLE, and an
// upper bound on it for every other parameter setting.
double analytic_bound(const data::MultimodalDataset& ds, int c, std::size_t m);

struct TrialRecord {
  std::size_t trial = 0;
  std::string kind;  // "random", "checkpoint" or "equality"
  std::uint64_t seed = 0;
  double weight_scale = 1.0;
  double model_lm = 0.0;
  double standard_error = 0.0;
  double gap = 0.0;  // analytic_bound - model_lm
  bool violated = false;
  std::string checkpoint;  // persisted parameters for failed trials
};

struct TheoremReport {
  int class_label = 0;
  std::size_t modality = 0;
  data::MleSolution mle;
  double analytic_bound = 0.0;
  double mle_perturbation = 0.0;
  TrialRecord equality;  // constant decoder at the (possibly perturbed) MLE
  std::vector<TrialRecord> trials;
  bool failed = false;

  std::size_t violations() const;
  double min_normalized_gap() const;  // min over trials of gap / stderr
};

struct VerifyOptions {
  std::size_t trials = 200;
  std::size_t mc_samples = 64;
  std::uint64_t seed = 0;
  // Added to every coordinate of the MLE mean used for the equality check
  // (negative control). Zero for the genuine check.
  double perturb_mle = 0.0;
  // Architecture for the random models. The likelihood must be diagonal so
  // the constant decoder can realize the per-dimension MLE variance.
  model::ArchitectureOptions architecture = [] {
    model::ArchitectureOptions a;
    a.isotropic_likelihood = false;
    return a;
  }();
  // Extra models (e.g. trained checkpoints) checked alongside the random
  // ones.
  std::vector<const model::MultimodalVae*> extra_models;
  // Where failed trials persist their parameters; nothing is written when
  // unset.
  std::optional<std::filesystem::path> failure_dir;
};

// Random parameterizations: trial i re-initializes with seed + i, scales
// every weight by {0.1, 1, 10}[i % 3], and draws biases N(0, 0.5^2).
model::MultimodalVae random_trial_model(const model::ArchitectureOptions& arch,
                                        std::uint64_t seed, std::size_t trial);

TheoremReport verify_theorem(const data::MultimodalDataset& ds, int c, std::size_t m,
                             const VerifyOptions& options);

// CSV with header class,modality,trial,kind,seed,weight_scale,model_lm,
// stderr,analytic_bound,gap,status (one row per trial, equality row first).
std::string to_csv(const TheoremReport& report);

struct MomentComparison {
  double mean_error = 0.0;             // |mean(samples) - mean(data)|
  std::vector<double> variance_ratio;  // var(samples) / var(data), per dim
};

// Biased (1/N) variances on both sides.
MomentComparison compare_moments(const Tensor& samples, const Tensor& data);

struct ClassCollapse {
  int label = 0;
  std::size_t n_samples = 0;
  // Decoded x1 means at g ~ q(g | x2 = c).
  double mean_error = 0.0;
  std::vector<double> variance_ratio;
  // x1 drawn from the decoded likelihood at the same g.
  double sampled_mean_error = 0.0;
  std::vector<double> sampled_variance_ratio;
};

struct CollapseReport {
  std::vector<ClassCollapse> classes;
};

// For each label c: draws g from the label-conditional posterior, decodes
// x1, and compares moments against the rows of class c.
CollapseReport collapse_metrics(const model::MultimodalVae& vae,
                                const data::MultimodalDataset& ds, std::size_t n_samples,
                                std::uint64_t seed);

std::string to_csv(const CollapseReport& report);

// Fraction of rows whose label is recovered by decoding x2 from
// g ~ q(g | x1) (one draw per row, argmax of the decoded logits).
double cross_modal_label_accuracy(const model::MultimodalVae& vae,
                                  const data::MultimodalDataset& ds, std::uint64_t seed);

}  // namespace mmvae::theorem
