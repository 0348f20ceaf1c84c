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

#include <cmath>
#include <filesystem>
#include <numbers>

#include "gtest/gtest.h"
#include "mmvae/csv.hpp"
#include "oracles.hpp"

namespace mmvae::theorem {
namespace {

data::MultimodalDataset Small(std::size_t n_per_class, std::uint64_t seed) {
  data::DataGenConfig cfg;
  cfg.n_per_class = n_per_class;
  cfg.seed = seed;
  return data::generate(cfg);
}

VerifyOptions Options(std::size_t trials, std::uint64_t seed = 0) {
  VerifyOptions o;
  o.trials = trials;
  o.mc_samples = 16;
  o.seed = seed;
  return o;
}

TEST(TheoremTest, BoundOfThreePointsMatchesHandComputation) {
  const data::MultimodalDataset ds({0.0, 1.0, 1.0, 3.0, 2.0, -1.0, 9.0, 9.0},
                                   {0, 0, 0, 1});
  // Means (1, 1); biased variances (2/3, 8/3).
  double expected = 0.0;
  for (auto [a, b] : {std::pair{0.0, 1.0}, {1.0, 3.0}, {2.0, -1.0}}) {
    expected += testing::NormalLogPdf(a, 1.0, std::sqrt(2.0 / 3.0)) +
                testing::NormalLogPdf(b, 1.0, std::sqrt(8.0 / 3.0));
  }
  EXPECT_NEAR(analytic_bound(ds, 0, 0), expected, 1e-12);
  // Every row of the class carries the same label.
  EXPECT_NEAR(analytic_bound(ds, 0, 1), 0.0, 1e-12);
  EXPECT_EQ(modality_mle(ds, 0, 1).family, data::MleFamily::kCategorical);
}

TEST(TheoremTest, BoundDominatesNumericalMaximum) {
  const auto ds = Small(30, 5);
  const Tensor x = ds.x1_rows(ds.class_indices(1));
  auto loglik = [&](const std::vector<double>& p) {
    double s = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r)
      s += testing::NormalLogPdf(x(r, 0), p[0], std::exp(p[2])) +
           testing::NormalLogPdf(x(r, 1), p[1], std::exp(p[3]));
    return s;
  };
  const auto best = testing::CoordinateAscent(loglik, {0.0, 0.0, 0.0, 0.0});
  const double bound = analytic_bound(ds, 1, 0);
  EXPECT_LE(loglik(best), bound + 1e-9);
  EXPECT_NEAR(loglik(best), bound, 1e-6);
}

TEST(TheoremTest, IdenticalPointsGiveFiniteBound) {
  const data::MultimodalDataset ds({0.5, 0.5, 0.5, 0.5, 1.0, 2.0}, {0, 0, 1});
  const auto mle = modality_mle(ds, 0, 0);
  EXPECT_TRUE(mle.variance_floored);
  EXPECT_TRUE(std::isfinite(analytic_bound(ds, 0, 0)));
  EXPECT_TRUE(std::isfinite(analytic_bound(ds, 1, 0)));
}

TEST(TheoremTest, RandomModelsStayBelowBound) {
  const auto ds = Small(60, 2);
  for (int c : {0, 1}) {
    for (std::size_t m : {0u, 1u}) {
      const auto report = verify_theorem(ds, c, m, Options(12, 4));
      EXPECT_FALSE(report.failed) << "c=" << c << " m=" << m;
      EXPECT_EQ(report.violations(), 0u);
      for (const auto& t : report.trials) {
        EXPECT_GE(t.gap + kStderrTolerance * t.standard_error, 0.0);
        EXPECT_EQ(t.kind, "random");
      }
    }
  }
}

TEST(TheoremTest, ConstantDecoderAtMleAttainsBound) {
  const auto ds = Small(80, 7);
  for (int c : {0, 1}) {
    for (std::size_t m : {0u, 1u}) {
      const auto report = verify_theorem(ds, c, m, Options(1, 9));
      EXPECT_FALSE(report.equality.violated);
      EXPECT_NEAR(report.equality.gap, 0.0, 1e-8 * std::abs(report.analytic_bound) + 1e-10);
    }
  }
}

TEST(TheoremTest, ShiftedMleBreaksEquality) {
  const auto ds = Small(80, 7);
  auto options = Options(1, 9);
  options.perturb_mle = 1.0;
  const auto report = verify_theorem(ds, 0, 0, options);
  EXPECT_TRUE(report.equality.violated);
  EXPECT_TRUE(report.failed);
  EXPECT_GT(report.equality.gap, 0.0);
}

TEST(TheoremTest, FailedTrialsPersistParameters) {
  const auto dir = std::filesystem::temp_directory_path() / "mmvae_theorem_failures";
  std::filesystem::remove_all(dir);
  const auto ds = Small(20, 1);
  auto options = Options(1);
  options.perturb_mle = 1.0;
  options.failure_dir = dir;
  const auto report = verify_theorem(ds, 1, 0, options);
  ASSERT_TRUE(report.equality.violated);
  EXPECT_TRUE(std::filesystem::exists(report.equality.checkpoint));
  EXPECT_TRUE(std::filesystem::exists(dir / "failed_c1_m0_equality_0_config.txt"));

  // The persisted parameters reproduce the failing estimate.
  auto vae = model::MultimodalVae::init(
      model::ModelConfig::Make(model::ModelKind::kMmvae, options.architecture));
  vae.parameters().load(report.equality.checkpoint);
  const auto check = verify_theorem(ds, 1, 0, [&] {
    auto o = Options(1);
    o.extra_models = {&vae};
    return o;
  }());
  EXPECT_NEAR(check.trials.back().model_lm, report.equality.model_lm,
              1e-9 * std::abs(report.equality.model_lm));
  EXPECT_FALSE(check.trials.back().violated);
  EXPECT_EQ(check.trials.back().kind, "checkpoint");
  std::filesystem::remove_all(dir);
}

TEST(TheoremTest, TrialScalesCycle) {
  const auto arch = VerifyOptions{}.architecture;
  for (std::size_t trial = 0; trial < 3; ++trial) {
    const double scale = std::array{0.1, 1.0, 10.0}[trial];
    const auto vae = random_trial_model(arch, 5, trial);
    for (const auto& p : vae.parameters().entries()) {
      if (p.name.ends_with(".weight")) {
        const double bound = scale / std::sqrt(static_cast<double>(p.shape[0]));
        for (double v : p.values) EXPECT_LE(std::abs(v), bound * (1 + 1e-12));
      }
    }
  }
}

TEST(TheoremTest, ReportCsvHasOneRowPerTrial) {
  const auto report = verify_theorem(Small(10, 0), 0, 0, Options(3));
  const std::string text = to_csv(report);
  EXPECT_TRUE(text.starts_with(
      "class,modality,trial,kind,seed,weight_scale,model_lm,stderr,analytic_bound,gap,status\n"));
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);
  EXPECT_NE(text.find(",equality,"), std::string::npos);
  EXPECT_THROW(verify_theorem(Small(10, 0), 0, 2, Options(1)), std::out_of_range);
  EXPECT_THROW(verify_theorem(Small(10, 0), 0, 0, Options(0)), std::invalid_argument);
}

TEST(TheoremTest, MomentsOfDataAgainstItselfAreExact) {
  const Tensor x({50, 2}, testing::RandomVector(100, 3, 2.0));
  const auto cmp = compare_moments(x, x);
  EXPECT_EQ(cmp.mean_error, 0.0);
  EXPECT_EQ(cmp.variance_ratio, (std::vector<double>{1.0, 1.0}));
}

TEST(TheoremTest, MomentsOfPointMassCollapse) {
  const Tensor x({50, 2}, testing::RandomVector(100, 3, 2.0));
  const auto cmp = compare_moments(Tensor::Filled(10, 2, 0.25), x);
  for (double r : cmp.variance_ratio) EXPECT_EQ(r, 0.0);
}

TEST(TheoremTest, ConstantDecoderAtMleCollapsesMeansButNotDraws) {
  const auto ds = Small(1000, 0);
  auto vae = model::MultimodalVae::init(
      model::ModelConfig::Make(model::ModelKind::kMmvae, VerifyOptions{}.architecture));
  model::set_constant_decoder(vae, 0, model::ConstantTarget::FromMle(modality_mle(ds, 0, 0)));
  const auto report = collapse_metrics(vae, ds, 20000, 1);
  ASSERT_EQ(report.classes.size(), 2u);
  const auto& cls = report.classes[0];
  EXPECT_EQ(cls.n_samples, 20000u);
  // Decoded means sit on the class mean; draws reproduce its spread.
  EXPECT_NEAR(cls.mean_error, 0.0, 1e-12);
  for (double r : cls.variance_ratio) EXPECT_NEAR(r, 0.0, 1e-20);
  for (double r : cls.sampled_variance_ratio) EXPECT_NEAR(r, 1.0, 0.05);
  EXPECT_LT(cls.sampled_mean_error, 0.05);
  // The other class is 4 away along the first axis.
  EXPECT_NEAR(report.classes[1].mean_error, 4.0, 0.1);
}

TEST(TheoremTest, CollapseCsvHasOneRowPerClass) {
  const auto ds = Small(20, 0);
  const auto vae = model::MultimodalVae::init(model::ModelConfig::Make(model::ModelKind::kMvae));
  const auto text = to_csv(collapse_metrics(vae, ds, 30, 0));
  EXPECT_TRUE(text.starts_with("label,n_samples,mean_error,var_ratio_a,var_ratio_b,"));
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
}

TEST(TheoremTest, LabelAccuracyIsAFraction) {
  const auto ds = Small(25, 0);
  const auto vae = model::MultimodalVae::init(model::ModelConfig::Make(model::ModelKind::kMmvae));
  const double acc = cross_modal_label_accuracy(vae, ds, 0);
  EXPECT_GE(acc, 0.0);
  EXPECT_LE(acc, 1.0);
  EXPECT_EQ(acc * 50.0, std::round(acc * 50.0));
}

}  // namespace
}  // namespace mmvae::theorem
