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
#include <span>
#include <string>
#include <vector>

#include "mmvae/datagen.hpp"
#include "mmvae/models.hpp"
#include "mmvae/theorem.hpp"

namespace mmvae::train {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

// First and second moment buffers, one per parameter tensor.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t step = 0;

  static AdamState For(const model::ParameterStore& params);
};

// One bias-corrected Adam step that decreases the loss whose gradients are
// `grads`. Throws ShapeError when params, grads and state disagree.
void adam_step(model::ParameterStore& params, std::span<const std::vector<double>> grads,
               AdamState& state, const AdamConfig& cfg);

struct TrainConfig {
  model::ModelKind model = model::ModelKind::kMmvae;
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  AdamConfig adam;
  std::size_t mc_samples = 8;
  std::uint64_t seed = 0;
  std::size_t eval_every = 25;
  std::size_t eval_mc_samples = 64;
  std::size_t collapse_samples = 2000;
  // Run directory; nothing is written when unset.
  std::optional<std::filesystem::path> output_dir;
  // The model seed is taken from `seed`, not from here.
  model::ArchitectureOptions architecture;

  void validate() const;
};

std::string config_to_text(const TrainConfig& cfg);

struct EvalPoint {
  std::size_t epoch = 0;
  double objective = 0.0;
  std::vector<std::pair<std::string, double>> per_term;
  theorem::CollapseReport collapse;
  double seconds = 0.0;
};

struct RunRecord {
  std::vector<EvalPoint> points;

  // epoch,objective,<terms>,mean_err_c0,...,seconds
  std::string to_csv() const;
};

struct TrainResult {
  model::MultimodalVae model;
  RunRecord record;
  bool aborted = false;
  std::string abort_reason;
};

// Full-batch objective at `K` samples plus collapse metrics.
EvalPoint evaluate(const model::MultimodalVae& vae, const data::MultimodalDataset& ds,
                   std::size_t K, std::size_t collapse_samples, std::uint64_t seed);

// Adam on -(N/B) * objective over shuffled minibatches. Evaluates after
// epoch 1, every eval_every epochs, and after the last epoch; each
// evaluation rewrites checkpoint.txt and runrecord.csv in the run
// directory. A non-finite objective or parameter stops training with the
// last evaluated parameters restored and `aborted` set.
TrainResult train(const TrainConfig& cfg, const data::MultimodalDataset& ds);

}  // namespace mmvae::train
