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
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mmvae/datagen.hpp"
#include "mmvae/distributions.hpp"
#include "mmvae/tensor.hpp"

namespace mmvae::model {

enum class Activation { kTanh, kRelu };
enum class ModelKind { kMmvae, kMvae };
enum class ModalityKind { kContinuous, kCategorical };

ModelKind kind_from_name(std::string_view name);
std::string_view name(ModelKind kind);
Activation activation_from_name(std::string_view name);
std::string_view name(Activation activation);

struct MlpSpec {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_dims;
  std::size_t output_dim = 1;
  Activation activation = Activation::kTanh;

  void validate() const;
  // sum over layers of (fan_in * fan_out + fan_out)
  std::size_t parameter_count() const;
};

// `dim` is the feature dimension for continuous modalities and the number
// of classes for categorical ones (whose encoder input is one-hot).
struct ModalitySpec {
  std::string name;
  ModalityKind kind = ModalityKind::kContinuous;
  std::size_t dim = 2;
};

struct ArchitectureOptions {
  std::size_t latent_dim = 2;
  std::vector<std::size_t> hidden_dims{32, 32};
  Activation activation = Activation::kTanh;
  bool isotropic_latent = true;
  bool isotropic_likelihood = true;
  std::uint64_t seed = 0;
  std::vector<ModalitySpec> modalities{
      {"x1", ModalityKind::kContinuous, 2}, {"x2", ModalityKind::kCategorical, 2}};
};

struct ModelConfig {
  ModelKind kind = ModelKind::kMmvae;
  std::size_t latent_dim = 2;
  std::vector<ModalitySpec> modalities;
  std::vector<MlpSpec> encoders;  // one per modality
  std::vector<MlpSpec> decoders;  // one per modality
  bool isotropic_latent = true;
  bool isotropic_likelihood = true;
  std::uint64_t seed = 0;

  // Same hidden layers for every network, head widths implied by the
  // isotropy flags.
  static ModelConfig Make(ModelKind kind, const ArchitectureOptions& arch = {});

  std::size_t encoder_output_dim() const;
  std::size_t decoder_output_dim(std::size_t m) const;
  std::size_t encoder_input_dim(std::size_t m) const { return modalities.at(m).dim; }

  void validate() const;
};

using DecodedParams = std::variant<dist::DiagGaussianParams, dist::CategoricalParams>;

// log f_m(x | decoded) per row; `x` is one-hot for categorical modalities.
Tensor log_likelihood(const DecodedParams& params, const Tensor& x);

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

// Ordered, named parameter tensors (theta and phi together).
class ParameterStore {
 public:
  std::size_t add(std::string name, Shape shape, std::vector<double> values);
  std::size_t size() const { return entries_.size(); }
  std::size_t total_values() const;
  const NamedTensor& operator[](std::size_t i) const { return entries_.at(i); }
  NamedTensor& operator[](std::size_t i) { return entries_.at(i); }
  std::size_t index_of(std::string_view name) const;
  const std::vector<NamedTensor>& entries() const { return entries_; }

  std::vector<double> flatten() const;
  void assign_flat(std::span<const double> values);

  // Text checkpoint: one line per tensor, `name shape_csv value_csv`.
  std::string to_text() const;
  // Loads values for every tensor of this store from checkpoint text; names
  // and shapes must match exactly.
  void load_text(std::string_view text);
  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

 private:
  std::vector<NamedTensor> entries_;
};

class MultimodalVae;

// The model evaluated with a particular set of parameter tensors: either
// plain constants or leaves bound to a tape.
class ModelView {
 public:
  ModelView(const MultimodalVae& vae, std::vector<Tensor> params)
      : vae_(&vae), params_(std::move(params)) {}

  const MultimodalVae& vae() const { return *vae_; }
  const std::vector<Tensor>& params() const { return params_; }

  // Posterior expert r_m(g | kappa_m(x_m)).
  dist::DiagGaussianParams encode(std::size_t m, const Tensor& x) const;
  // Likelihood parameters tau_m(g).
  DecodedParams decode(std::size_t m, const Tensor& g) const;

 private:
  Tensor RunMlp(std::size_t first_param, const MlpSpec& spec, const Tensor& x) const;

  const MultimodalVae* vae_;
  std::vector<Tensor> params_;
};

class MultimodalVae {
 public:
  // Fan-in scaled uniform weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero
  // biases, deterministic in cfg.seed.
  static MultimodalVae init(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  ModelKind kind() const { return cfg_.kind; }
  std::size_t num_modalities() const { return cfg_.modalities.size(); }
  std::size_t latent_dim() const { return cfg_.latent_dim; }
  // Index of the label modality (the last one).
  std::size_t label_modality() const { return num_modalities() - 1; }

  ParameterStore& parameters() { return params_; }
  const ParameterStore& parameters() const { return params_; }
  // Closed-form count from the layer shapes in the config.
  std::size_t expected_parameter_count() const;

  ModelView view() const;
  ModelView bind(Tape& tape) const;

  dist::DiagGaussianParams encode(std::size_t m, const Tensor& x) const {
    return view().encode(m, x);
  }
  DecodedParams decode(std::size_t m, const Tensor& g) const {
    return view().decode(m, g);
  }

  // First parameter index (weight of layer 0) of each network.
  std::size_t encoder_offset(std::size_t m) const { return encoder_offsets_.at(m); }
  std::size_t decoder_offset(std::size_t m) const { return decoder_offsets_.at(m); }

 private:
  ModelConfig cfg_;
  ParameterStore params_;
  std::vector<std::size_t> encoder_offsets_;
  std::vector<std::size_t> decoder_offsets_;
};

// Target for a g-invariant decoder: gaussian mean/std or categorical
// probabilities (zero probabilities map to a very negative logit).
struct ConstantTarget {
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<double> probabilities;

  static ConstantTarget Gaussian(std::vector<double> mean, std::vector<double> std);
  static ConstantTarget Categorical(std::vector<double> probabilities);
  static ConstantTarget FromMle(const data::MleSolution& mle);
};

// Zeroes the last-layer weights of decoder m and sets its bias so that
// decode(m, g) equals `target` for every g. Throws DomainError when a std is
// not positive or falls outside the log-std clamp, and std::invalid_argument
// when the target family or isotropy does not fit decoder m.
MultimodalVae& set_constant_decoder(MultimodalVae& vae, std::size_t m,
                                    const ConstantTarget& target);

// Run directory config (`key=value` lines).
std::string config_to_text(const ModelConfig& cfg);
ModelConfig config_from_map(const std::map<std::string, std::string>& kv);
std::map<std::string, std::string> parse_key_values(std::string_view text);

}  // namespace mmvae::model
