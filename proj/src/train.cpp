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


#include "mmvae/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "mmvae/csv.hpp"
#include "mmvae/kernels.hpp"
#include "mmvae/objectives.hpp"
#include "mmvae/random.hpp"

namespace mmvae::train {

namespace {

constexpr std::uint64_t kShuffleStream = 0x2545F4914F6CDD1DULL;
constexpr std::uint64_t kNoiseStream = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kEvalStream = 0xBF58476D1CE4E5B9ULL;

bool AllFinite(const model::ParameterStore& params) {
  for (const auto& p : params.entries())
    for (double v : p.values)
      if (!std::isfinite(v)) return false;
  return true;
}

void WriteRun(const std::filesystem::path& dir, const model::MultimodalVae& vae,
              const RunRecord& record) {
  vae.parameters().save(dir / "checkpoint.txt");
  csv::write_text(dir / "runrecord.csv", record.to_csv());
}

}  // namespace

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("adam: learning_rate must be positive");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("adam: beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("adam: beta2 must be in [0, 1)");
  if (!(eps > 0.0)) throw std::invalid_argument("adam: eps must be positive");
}

AdamState AdamState::For(const model::ParameterStore& params) {
  AdamState s;
  for (const auto& p : params.entries()) {
    s.m.emplace_back(p.values.size(), 0.0);
    s.v.emplace_back(p.values.size(), 0.0);
  }
  return s;
}

void adam_step(model::ParameterStore& params, std::span<const std::vector<double>> grads,
               AdamState& state, const AdamConfig& cfg) {
  const std::size_t n = params.size();
  if (grads.size() != n || state.m.size() != n || state.v.size() != n) {
    throw ShapeError("adam_step: expected " + std::to_string(n) + " tensors, got " +
                     std::to_string(grads.size()) + " grads and " +
                     std::to_string(state.m.size()) + " moment buffers");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t size = params[i].values.size();
    if (grads[i].size() != size || state.m[i].size() != size || state.v[i].size() != size) {
      throw ShapeError("adam_step: size mismatch for '" + params[i].name + "'");
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const kernels::AdamCoefficients coeff{cfg.learning_rate,
                                        cfg.beta1,
                                        cfg.beta2,
                                        cfg.eps,
                                        1.0 - std::pow(cfg.beta1, t),
                                        1.0 - std::pow(cfg.beta2, t)};
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < n; ++i) {
    k.adam_update(params[i].values.data(), grads[i].data(), state.m[i].data(),
                  state.v[i].data(), grads[i].size(), coeff);
  }
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (mc_samples < 1) throw std::invalid_argument("train: mc_samples must be >= 1");
  if (eval_mc_samples < 1) throw std::invalid_argument("train: eval_mc_samples must be >= 1");
  if (eval_every < 1) throw std::invalid_argument("train: eval_every must be >= 1");
  if (collapse_samples < 1) throw std::invalid_argument("train: collapse_samples must be >= 1");
  adam.validate();
}

std::string config_to_text(const TrainConfig& cfg) {
  model::ArchitectureOptions arch = cfg.architecture;
  arch.seed = cfg.seed;
  std::ostringstream os;
  os << model::config_to_text(model::ModelConfig::Make(cfg.model, arch));
  os << "epochs=" << cfg.epochs << '\n';
  os << "batch_size=" << cfg.batch_size << '\n';
  os << "learning_rate=" << csv::format_real(cfg.adam.learning_rate) << '\n';
  os << "adam_beta1=" << csv::format_real(cfg.adam.beta1) << '\n';
  os << "adam_beta2=" << csv::format_real(cfg.adam.beta2) << '\n';
  os << "adam_eps=" << csv::format_real(cfg.adam.eps) << '\n';
  os << "mc_samples=" << cfg.mc_samples << '\n';
  os << "seed=" << cfg.seed << '\n';
  os << "eval_every=" << cfg.eval_every << '\n';
  os << "eval_mc_samples=" << cfg.eval_mc_samples << '\n';
  os << "collapse_samples=" << cfg.collapse_samples << '\n';
  return os.str();
}

std::string RunRecord::to_csv() const {
  std::string out = "epoch,objective";
  if (!points.empty()) {
    for (const auto& [name, value] : points.front().per_term) out += ',' + name;
  }
  out += ",mean_err_c0,var_ratio_a_c0,var_ratio_b_c0,mean_err_c1,var_ratio_a_c1,"
         "var_ratio_b_c1,seconds\n";
  for (const auto& p : points) {
    out += std::to_string(p.epoch) + ',' + csv::format_real(p.objective);
    for (const auto& [name, value] : p.per_term) out += ',' + csv::format_real(value);
    for (int c = 0; c < 2; ++c) {
      const auto it = std::find_if(p.collapse.classes.begin(), p.collapse.classes.end(),
                                   [c](const auto& cc) { return cc.label == c; });
      if (it == p.collapse.classes.end()) {
        out += ",nan,nan,nan";
      } else {
        out += ',' + csv::format_real(it->mean_error) + ',' +
               csv::join_reals(it->variance_ratio);
      }
    }
    out += ',' + csv::format_real(p.seconds) + '\n';
  }
  return out;
}

EvalPoint evaluate(const model::MultimodalVae& vae, const data::MultimodalDataset& ds,
                   std::size_t K, std::size_t collapse_samples, std::uint64_t seed) {
  NoiseSource noise(seed);
  const auto batch = objectives::Batch::FromDataset(ds);
  const auto est = objectives::objective(vae.view(), batch, K, noise);
  EvalPoint point;
  point.objective = est.total;
  point.per_term = est.per_term;
  point.collapse = theorem::collapse_metrics(vae, ds, collapse_samples, noise.next_u64());
  return point;
}

TrainResult train(const TrainConfig& cfg, const data::MultimodalDataset& ds) {
  cfg.validate();
  model::ArchitectureOptions arch = cfg.architecture;
  arch.seed = cfg.seed;
  TrainResult result{model::MultimodalVae::init(model::ModelConfig::Make(cfg.model, arch)),
                     {}, false, {}};
  model::MultimodalVae& vae = result.model;
  if (cfg.output_dir) {
    std::filesystem::create_directories(*cfg.output_dir);
    csv::write_text(*cfg.output_dir / "config.txt", config_to_text(cfg));
  }

  const std::size_t N = ds.size();
  const std::size_t B = std::min(cfg.batch_size, N);
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 shuffle_rng(cfg.seed ^ kShuffleStream);
  NoiseSource noise(cfg.seed ^ kNoiseStream);
  AdamState state = AdamState::For(vae.parameters());
  model::ParameterStore last_good = vae.parameters();
  const auto start = std::chrono::steady_clock::now();

  std::vector<std::vector<double>> grads(vae.parameters().size());
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    try {
      for (std::size_t begin = 0; begin < N; begin += B) {
        const std::size_t end = std::min(begin + B, N);
        const std::span<const std::size_t> rows(order.data() + begin, end - begin);
        const auto batch = objectives::Batch::FromDataset(ds, rows);
        Tape tape;
        const model::ModelView view = vae.bind(tape);
        const auto est = objectives::objective(view, batch, cfg.mc_samples, noise);
        const Gradients g = backward(tape, est.total_tensor);
        const double loss_scale = -static_cast<double>(N) / static_cast<double>(rows.size());
        for (std::size_t i = 0; i < grads.size(); ++i) {
          const Tensor gi = g.of(view.params()[i]);
          grads[i].assign(gi.data().begin(), gi.data().end());
          for (double& x : grads[i]) x *= loss_scale;
        }
        adam_step(vae.parameters(), grads, state, cfg.adam);
        if (!AllFinite(vae.parameters())) {
          throw NonFiniteError("train: non-finite parameter after step " +
                               std::to_string(state.step));
        }
      }
      if (epoch == 1 || epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
        EvalPoint point = evaluate(vae, ds, cfg.eval_mc_samples, cfg.collapse_samples,
                                   (cfg.seed ^ kEvalStream) + epoch);
        point.epoch = epoch;
        point.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                            .count();
        result.record.points.push_back(std::move(point));
        last_good = vae.parameters();
        if (cfg.output_dir) WriteRun(*cfg.output_dir, vae, result.record);
      }
    } catch (const NonFiniteError& e) {
      result.aborted = true;
      result.abort_reason = "epoch " + std::to_string(epoch) + ": " + e.what();
      vae.parameters() = last_good;
      break;
    }
  }
  return result;
}

}  // namespace mmvae::train
