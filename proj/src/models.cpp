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

#include "mmvae/models.hpp"

#include <cmath>
#include <sstream>

#include "mmvae/csv.hpp"
#include "mmvae/random.hpp"

namespace mmvae::model {

ModelKind kind_from_name(std::string_view name) {
  if (name == "mmvae") return ModelKind::kMmvae;
  if (name == "mvae") return ModelKind::kMvae;
  throw std::invalid_argument("unknown model kind '" + std::string(name) + "'");
}

std::string_view name(ModelKind kind) {
  return kind == ModelKind::kMmvae ? "mmvae" : "mvae";
}

Activation activation_from_name(std::string_view name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

std::string_view name(Activation activation) {
  return activation == Activation::kTanh ? "tanh" : "relu";
}

void MlpSpec::validate() const {
  if (input_dim < 1 || output_dim < 1) {
    throw std::invalid_argument("MlpSpec: dimensions must be >= 1");
  }
  for (std::size_t h : hidden_dims) {
    if (h < 1) throw std::invalid_argument("MlpSpec: hidden widths must be >= 1");
  }
}

std::size_t MlpSpec::parameter_count() const {
  std::size_t total = 0;
  std::size_t fan_in = input_dim;
  for (std::size_t h : hidden_dims) {
    total += fan_in * h + h;
    fan_in = h;
  }
  return total + fan_in * output_dim + output_dim;
}

ModelConfig ModelConfig::Make(ModelKind kind, const ArchitectureOptions& arch) {
  ModelConfig cfg;
  cfg.kind = kind;
  cfg.latent_dim = arch.latent_dim;
  cfg.modalities = arch.modalities;
  cfg.isotropic_latent = arch.isotropic_latent;
  cfg.isotropic_likelihood = arch.isotropic_likelihood;
  cfg.seed = arch.seed;
  for (std::size_t m = 0; m < cfg.modalities.size(); ++m) {
    cfg.encoders.push_back({cfg.encoder_input_dim(m), arch.hidden_dims,
                            cfg.encoder_output_dim(), arch.activation});
    cfg.decoders.push_back({cfg.latent_dim, arch.hidden_dims, cfg.decoder_output_dim(m),
                            arch.activation});
  }
  cfg.validate();
  return cfg;
}

std::size_t ModelConfig::encoder_output_dim() const {
  return latent_dim + (isotropic_latent ? 1 : latent_dim);
}

std::size_t ModelConfig::decoder_output_dim(std::size_t m) const {
  const ModalitySpec& spec = modalities.at(m);
  if (spec.kind == ModalityKind::kCategorical) return spec.dim;
  return spec.dim + (isotropic_likelihood ? 1 : spec.dim);
}

void ModelConfig::validate() const {
  if (latent_dim < 1) throw std::invalid_argument("latent_dim must be >= 1");
  if (modalities.empty()) throw std::invalid_argument("need at least one modality");
  if (encoders.size() != modalities.size() || decoders.size() != modalities.size()) {
    throw std::invalid_argument("need one encoder and one decoder per modality");
  }
  for (std::size_t m = 0; m < modalities.size(); ++m) {
    const ModalitySpec& spec = modalities[m];
    if (spec.kind == ModalityKind::kCategorical && spec.dim < 2) {
      throw std::invalid_argument("categorical modality needs C >= 2");
    }
    encoders[m].validate();
    decoders[m].validate();
    if (encoders[m].input_dim != encoder_input_dim(m) ||
        encoders[m].output_dim != encoder_output_dim()) {
      throw std::invalid_argument("encoder " + spec.name + " has the wrong head width");
    }
    if (decoders[m].input_dim != latent_dim ||
        decoders[m].output_dim != decoder_output_dim(m)) {
      throw std::invalid_argument("decoder " + spec.name + " has the wrong head width");
    }
  }
}

Tensor log_likelihood(const DecodedParams& params, const Tensor& x) {
  return std::visit(
      [&x](const auto& p) -> Tensor {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, dist::DiagGaussianParams>) {
          return dist::gaussian_log_prob(x, p);
        } else {
          return dist::categorical_log_prob(x, p);
        }
      },
      params);
}

// ---------------------------------------------------------------------------
// ParameterStore

std::size_t ParameterStore::add(std::string name, Shape shape, std::vector<double> values) {
  if (ShapeSize(shape) != values.size()) {
    throw ShapeError("parameter " + name + ": shape " + ShapeToString(shape) +
                     " does not match " + std::to_string(values.size()) + " values");
  }
  entries_.push_back({std::move(name), std::move(shape), std::move(values)});
  return entries_.size() - 1;
}

std::size_t ParameterStore::total_values() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.values.size();
  return n;
}

std::size_t ParameterStore::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return i;
  }
  throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

std::vector<double> ParameterStore::flatten() const {
  std::vector<double> out;
  out.reserve(total_values());
  for (const auto& e : entries_) out.insert(out.end(), e.values.begin(), e.values.end());
  return out;
}

void ParameterStore::assign_flat(std::span<const double> values) {
  if (values.size() != total_values()) {
    throw ShapeError("assign_flat: expected " + std::to_string(total_values()) +
                     " values, got " + std::to_string(values.size()));
  }
  std::size_t offset = 0;
  for (auto& e : entries_) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), e.values.size(),
                e.values.begin());
    offset += e.values.size();
  }
}

std::string ParameterStore::to_text() const {
  std::string out;
  for (const auto& e : entries_) {
    out += e.name;
    out += ' ';
    for (std::size_t i = 0; i < e.shape.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(e.shape[i]);
    }
    out += ' ';
    out += csv::join_reals(e.values);
    out += '\n';
  }
  return out;
}

void ParameterStore::load_text(std::string_view text) {
  std::map<std::string, std::pair<Shape, std::vector<double>>> loaded;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = csv::split(line, ' ');
    if (fields.size() != 3) throw csv::IoError("checkpoint: malformed line for " + fields[0]);
    Shape shape;
    for (const auto& d : csv::split(fields[1])) {
      shape.push_back(static_cast<std::size_t>(csv::parse_int(d)));
    }
    std::vector<double> values;
    for (const auto& v : csv::split(fields[2])) values.push_back(csv::parse_real(v));
    loaded[fields[0]] = {std::move(shape), std::move(values)};
  }
  for (auto& e : entries_) {
    const auto it = loaded.find(e.name);
    if (it == loaded.end()) throw csv::IoError("checkpoint: missing parameter " + e.name);
    if (it->second.first != e.shape || it->second.second.size() != e.values.size()) {
      throw csv::IoError("checkpoint: shape mismatch for " + e.name);
    }
  }
  if (loaded.size() != entries_.size()) {
    throw csv::IoError("checkpoint: unexpected extra parameters");
  }
  for (auto& e : entries_) e.values = loaded[e.name].second;
}

void ParameterStore::save(const std::filesystem::path& path) const {
  csv::write_text(path, to_text());
}

void ParameterStore::load(const std::filesystem::path& path) {
  load_text(csv::read_text(path));
}

// ---------------------------------------------------------------------------
// Model

namespace {

std::size_t AddMlp(ParameterStore& store, const std::string& prefix, const MlpSpec& spec,
                   NoiseSource& rng) {
  const std::size_t first = store.size();
  std::vector<std::size_t> widths = spec.hidden_dims;
  widths.push_back(spec.output_dim);
  std::size_t fan_in = spec.input_dim;
  for (std::size_t l = 0; l < widths.size(); ++l) {
    const std::size_t fan_out = widths[l];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> w(fan_in * fan_out);
    for (double& v : w) v = rng.uniform(-bound, bound);
    const std::string layer = prefix + ".l" + std::to_string(l);
    store.add(layer + ".weight", {fan_in, fan_out}, std::move(w));
    store.add(layer + ".bias", {1, fan_out}, std::vector<double>(fan_out, 0.0));
    fan_in = fan_out;
  }
  return first;
}

std::size_t NumLayers(const MlpSpec& spec) { return spec.hidden_dims.size() + 1; }

}  // namespace

MultimodalVae MultimodalVae::init(const ModelConfig& cfg) {
  cfg.validate();
  MultimodalVae vae;
  vae.cfg_ = cfg;
  NoiseSource rng(cfg.seed);
  for (std::size_t m = 0; m < cfg.modalities.size(); ++m) {
    vae.encoder_offsets_.push_back(
        AddMlp(vae.params_, "enc." + cfg.modalities[m].name, cfg.encoders[m], rng));
  }
  for (std::size_t m = 0; m < cfg.modalities.size(); ++m) {
    vae.decoder_offsets_.push_back(
        AddMlp(vae.params_, "dec." + cfg.modalities[m].name, cfg.decoders[m], rng));
  }
  return vae;
}

std::size_t MultimodalVae::expected_parameter_count() const {
  std::size_t total = 0;
  for (const auto& s : cfg_.encoders) total += s.parameter_count();
  for (const auto& s : cfg_.decoders) total += s.parameter_count();
  return total;
}

ModelView MultimodalVae::view() const {
  std::vector<Tensor> tensors;
  tensors.reserve(params_.size());
  for (const auto& e : params_.entries()) tensors.emplace_back(e.shape, e.values);
  return ModelView(*this, std::move(tensors));
}

ModelView MultimodalVae::bind(Tape& tape) const {
  std::vector<Tensor> tensors;
  tensors.reserve(params_.size());
  for (const auto& e : params_.entries()) {
    tensors.push_back(tape.variable(Tensor(e.shape, e.values)));
  }
  return ModelView(*this, std::move(tensors));
}

Tensor ModelView::RunMlp(std::size_t first_param, const MlpSpec& spec,
                         const Tensor& x) const {
  if (x.shape().size() != 2 || x.cols() != spec.input_dim) {
    throw ShapeError("network input must have " + std::to_string(spec.input_dim) +
                     " columns, got shape " + ShapeToString(x.shape()));
  }
  Tensor h = x;
  const std::size_t layers = NumLayers(spec);
  for (std::size_t l = 0; l < layers; ++l) {
    const Tensor& w = params_[first_param + 2 * l];
    const Tensor& b = params_[first_param + 2 * l + 1];
    h = broadcast_add_row(matmul(h, w), b);
    if (l + 1 < layers) h = spec.activation == Activation::kTanh ? tanh(h) : relu(h);
  }
  return h;
}

dist::DiagGaussianParams ModelView::encode(std::size_t m, const Tensor& x) const {
  const ModelConfig& cfg = vae_->config();
  const Tensor out = RunMlp(vae_->encoder_offset(m), cfg.encoders.at(m), x);
  const std::size_t d = cfg.latent_dim;
  Tensor log_std = clamp(slice_cols(out, d, out.cols()), dist::kLogStdMin, dist::kLogStdMax);
  if (cfg.isotropic_latent) log_std = repeat_cols(log_std, d);
  return {slice_cols(out, 0, d), log_std};
}

DecodedParams ModelView::decode(std::size_t m, const Tensor& g) const {
  const ModelConfig& cfg = vae_->config();
  if (g.shape().size() != 2 || g.cols() != cfg.latent_dim) {
    throw ShapeError("decode: latent must have " + std::to_string(cfg.latent_dim) +
                     " columns, got shape " + ShapeToString(g.shape()));
  }
  const Tensor out = RunMlp(vae_->decoder_offset(m), cfg.decoders.at(m), g);
  const ModalitySpec& spec = cfg.modalities.at(m);
  if (spec.kind == ModalityKind::kCategorical) return dist::CategoricalParams{out};
  Tensor log_std =
      clamp(slice_cols(out, spec.dim, out.cols()), dist::kLogStdMin, dist::kLogStdMax);
  if (cfg.isotropic_likelihood) log_std = repeat_cols(log_std, spec.dim);
  return dist::DiagGaussianParams{slice_cols(out, 0, spec.dim), log_std};
}

ConstantTarget ConstantTarget::Gaussian(std::vector<double> mean, std::vector<double> std) {
  ConstantTarget t;
  t.mean = std::move(mean);
  t.std = std::move(std);
  return t;
}

ConstantTarget ConstantTarget::Categorical(std::vector<double> probabilities) {
  ConstantTarget t;
  t.probabilities = std::move(probabilities);
  return t;
}

ConstantTarget ConstantTarget::FromMle(const data::MleSolution& mle) {
  if (mle.family == data::MleFamily::kCategorical) return Categorical(mle.probabilities);
  std::vector<double> std(mle.variance.size());
  for (std::size_t i = 0; i < std.size(); ++i) std[i] = std::sqrt(mle.variance[i]);
  return Gaussian(mle.mean, std::move(std));
}

MultimodalVae& set_constant_decoder(MultimodalVae& vae, std::size_t m,
                                    const ConstantTarget& target) {
  const ModelConfig& cfg = vae.config();
  const ModalitySpec& spec = cfg.modalities.at(m);
  std::vector<double> bias;
  if (spec.kind == ModalityKind::kContinuous) {
    if (target.mean.size() != spec.dim || target.std.size() != spec.dim) {
      throw std::invalid_argument("set_constant_decoder: decoder " + spec.name +
                                  " needs a gaussian target of dimension " +
                                  std::to_string(spec.dim));
    }
    bias = target.mean;
    std::vector<double> log_std;
    for (double s : target.std) {
      if (!(s > 0.0)) throw DomainError("set_constant_decoder: target std must be > 0");
      const double ls = std::log(s);
      if (ls < dist::kLogStdMin || ls > dist::kLogStdMax) {
        throw DomainError("set_constant_decoder: target std outside the log-std clamp");
      }
      log_std.push_back(ls);
    }
    if (cfg.isotropic_likelihood) {
      for (double s : target.std) {
        if (s != target.std.front()) {
          throw std::invalid_argument(
              "set_constant_decoder: isotropic decoder cannot represent unequal stds");
        }
      }
      log_std.resize(1);
    }
    bias.insert(bias.end(), log_std.begin(), log_std.end());
  } else {
    if (target.probabilities.size() != spec.dim) {
      throw std::invalid_argument("set_constant_decoder: decoder " + spec.name +
                                  " needs " + std::to_string(spec.dim) + " probabilities");
    }
    for (double p : target.probabilities) {
      if (!(p >= 0.0)) throw DomainError("set_constant_decoder: negative probability");
      bias.push_back(std::log(std::max(p, 1e-300)));
    }
  }

  const MlpSpec& net = cfg.decoders.at(m);
  const std::size_t last = vae.decoder_offset(m) + 2 * (net.hidden_dims.size());
  ParameterStore& store = vae.parameters();
  std::fill(store[last].values.begin(), store[last].values.end(), 0.0);
  store[last + 1].values = bias;
  return vae;
}

// ---------------------------------------------------------------------------
// config text

std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw csv::IoError("config: malformed line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

std::string config_to_text(const ModelConfig& cfg) {
  std::ostringstream os;
  os << "model=" << name(cfg.kind) << '\n';
  os << "latent_dim=" << cfg.latent_dim << '\n';
  os << "hidden_dims=";
  const auto& hidden = cfg.encoders.front().hidden_dims;
  for (std::size_t i = 0; i < hidden.size(); ++i) os << (i ? "," : "") << hidden[i];
  os << '\n';
  os << "activation=" << name(cfg.encoders.front().activation) << '\n';
  os << "isotropic_latent=" << (cfg.isotropic_latent ? 1 : 0) << '\n';
  os << "isotropic_likelihood=" << (cfg.isotropic_likelihood ? 1 : 0) << '\n';
  os << "model_seed=" << cfg.seed << '\n';
  return os.str();
}

ModelConfig config_from_map(const std::map<std::string, std::string>& kv) {
  auto get = [&kv](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw csv::IoError("config: missing key '" + key + "'");
    return it->second;
  };
  std::vector<std::size_t> hidden;
  if (!get("hidden_dims").empty()) {
    for (const auto& h : csv::split(get("hidden_dims"))) {
      hidden.push_back(static_cast<std::size_t>(csv::parse_int(h)));
    }
  }
  ArchitectureOptions arch;
  arch.hidden_dims = std::move(hidden);
  arch.latent_dim = static_cast<std::size_t>(csv::parse_int(get("latent_dim")));
  arch.isotropic_latent = get("isotropic_latent") == "1";
  arch.isotropic_likelihood = get("isotropic_likelihood") == "1";
  arch.seed = static_cast<std::uint64_t>(std::stoull(get("model_seed")));
  arch.activation = activation_from_name(get("activation"));
  return ModelConfig::Make(kind_from_name(get("model")), arch);
}

}  // namespace mmvae::model
