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


#include "mmvae/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>

#include "mmvae/csv.hpp"
#include "mmvae/datagen.hpp"
#include "mmvae/objectives.hpp"
#include "mmvae/random.hpp"
#include "mmvae/theorem.hpp"
#include "mmvae/train.hpp"

namespace mmvae::cli {

namespace {

// Thrown for flag values CLI11 cannot validate on its own.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct GenDataFlags {
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  std::string shape = "gaussians";
  std::string out;
};

struct TrainFlags {
  std::string model;
  std::string data;
  std::string out;
  train::TrainConfig cfg;
  std::vector<std::size_t> hidden{32, 32};
  std::size_t latent_dim = 2;
  std::string likelihood = "isotropic";
};

struct SampleFlags {
  std::string run;
  std::string source = "prior";
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  std::string emit = "means";
  std::string out;
};

struct VerifyFlags {
  std::string data;
  int label = 0;
  std::size_t modality = 0;
  std::size_t trials = 200;
  std::size_t mc_samples = 64;
  std::uint64_t seed = 0;
  double perturb_mle = 0.0;
  std::vector<std::string> runs;
  std::string failure_dir;
  std::string out;
};

struct LatentFlags {
  std::string run;
  std::string data;
  std::size_t samples_per_point = 1;
  std::uint64_t seed = 0;
  std::string out;
};

struct CollapseFlags {
  std::string run;
  std::string data;
  std::size_t n = 2000;
  std::uint64_t seed = 0;
  std::string out;
};

struct CheckFlags {
  std::string schema;
  std::vector<std::string> files;
};

int GenData(const GenDataFlags& f, std::ostream& out) {
  data::DataGenConfig cfg;
  cfg.n_per_class = f.n;
  cfg.seed = f.seed;
  cfg.shape = data::shape_from_name(f.shape);
  const auto ds = data::generate(cfg);
  data::write_csv(f.out, ds);
  out << "wrote " << ds.size() << " rows to " << f.out << '\n';
  return kExitOk;
}

int Train(TrainFlags f, std::ostream& out) {
  const auto ds = data::read_csv(f.data);
  f.cfg.model = model::kind_from_name(f.model);
  f.cfg.architecture.hidden_dims = f.hidden;
  f.cfg.architecture.latent_dim = f.latent_dim;
  f.cfg.architecture.isotropic_likelihood = f.likelihood == "isotropic";
  f.cfg.output_dir = f.out;
  const auto result = train::train(f.cfg, ds);
  if (!result.record.points.empty()) {
    const auto& last = result.record.points.back();
    out << "epoch " << last.epoch << " objective " << csv::format_real(last.objective) << '\n';
  }
  if (result.aborted) {
    out << "aborted: " << result.abort_reason << '\n';
    return kExitDomain;
  }
  return kExitOk;
}

int Sample(const SampleFlags& f, std::ostream& out) {
  const auto vae = load_run(f.run);
  const model::ModelView view = vae.view();
  const std::size_t label_m = vae.label_modality();
  const std::size_t C = vae.config().modalities.at(label_m).dim;
  NoiseSource noise(f.seed);
  std::string text = "x1_a,x1_b,source\n";
  if (f.n > 0) {
    dist::DiagGaussianParams posterior;
    if (f.source == "prior") {
      posterior = dist::DiagGaussianParams::StandardNormal(f.n, vae.latent_dim());
    } else {
      const long long c = f.source.starts_with("label:")
                              ? csv::parse_int(std::string_view(f.source).substr(6))
                              : -1;
      if (c < 0 || static_cast<std::size_t>(c) >= C) {
        throw UsageError("--source must be prior or label:<0.." + std::to_string(C - 1) + ">");
      }
      std::vector<double> one_hot(f.n * C, 0.0);
      for (std::size_t i = 0; i < f.n; ++i) one_hot[i * C + static_cast<std::size_t>(c)] = 1.0;
      posterior = objectives::unimodal_posterior(view, label_m,
                                                 Tensor({f.n, C}, std::move(one_hot)));
    }
    const Tensor g =
        dist::rsample(posterior, noise.standard_normal(f.n, vae.latent_dim()));
    const auto decoded = std::get<dist::DiagGaussianParams>(view.decode(0, g));
    const Tensor x =
        f.emit == "means"
            ? decoded.mean
            : dist::rsample(decoded, noise.standard_normal(f.n, decoded.dim()));
    for (std::size_t i = 0; i < f.n; ++i) {
      text += csv::format_real(x(i, 0)) + ',' + csv::format_real(x(i, 1)) + ',' + f.source +
              '\n';
    }
  }
  csv::write_text(f.out, text);
  out << "wrote " << f.n << " samples to " << f.out << '\n';
  return kExitOk;
}

int Verify(const VerifyFlags& f, std::ostream& out) {
  const auto ds = data::read_csv(f.data);
  if (f.label < 0 || static_cast<std::size_t>(f.label) >= ds.num_classes()) {
    throw UsageError("--class out of range");
  }
  theorem::VerifyOptions options;
  options.trials = f.trials;
  options.mc_samples = f.mc_samples;
  options.seed = f.seed;
  options.perturb_mle = f.perturb_mle;
  if (!f.failure_dir.empty()) options.failure_dir = f.failure_dir;
  std::vector<model::MultimodalVae> extra;
  extra.reserve(f.runs.size());
  for (const auto& r : f.runs) extra.push_back(load_run(r));
  for (const auto& m : extra) options.extra_models.push_back(&m);

  const auto report = theorem::verify_theorem(ds, f.label, f.modality, options);
  csv::write_text(f.out, theorem::to_csv(report));
  out << "class " << f.label << " modality " << f.modality << ": bound "
      << csv::format_real(report.analytic_bound) << ", " << report.violations()
      << " violations in " << report.trials.size() << " trials, equality "
      << (report.equality.violated ? "FAILED" : "ok") << '\n';
  return report.failed ? kExitDomain : kExitOk;
}

int Latent(const LatentFlags& f, std::ostream& out) {
  const auto vae = load_run(f.run);
  const auto ds = data::read_csv(f.data);
  const auto batch = objectives::Batch::FromDataset(ds);
  const model::ModelView view = vae.view();
  NoiseSource noise(f.seed);
  std::string text = "g_a,g_b,modality,label\n";
  std::size_t rows = 0;
  for (std::size_t m = 0; m < vae.num_modalities(); ++m) {
    const auto post = objectives::unimodal_posterior(view, m, batch.modalities[m]);
    const std::string modality = vae.config().modalities[m].name;
    std::vector<Tensor> draws;
    for (std::size_t s = 0; s < f.samples_per_point; ++s) {
      draws.push_back(dist::rsample(post, noise.standard_normal(ds.size(), vae.latent_dim())));
    }
    for (std::size_t n = 0; n < ds.size(); ++n) {
      const std::string suffix = ',' + modality + ',' + std::to_string(ds.x2()[n]) + '\n';
      text += csv::format_real(post.mean(n, 0)) + ',' + csv::format_real(post.mean(n, 1)) +
              suffix;
      for (const auto& d : draws) {
        text += csv::format_real(d(n, 0)) + ',' + csv::format_real(d(n, 1)) + suffix;
      }
      rows += 1 + draws.size();
    }
  }
  csv::write_text(f.out, text);
  out << "wrote " << rows << " rows to " << f.out << '\n';
  return kExitOk;
}

int Collapse(const CollapseFlags& f, std::ostream& out) {
  const auto vae = load_run(f.run);
  const auto ds = data::read_csv(f.data);
  const auto report = theorem::collapse_metrics(vae, ds, f.n, f.seed);
  csv::write_text(f.out, theorem::to_csv(report));
  for (const auto& c : report.classes) {
    out << "label " << c.label << ": mean_error " << csv::format_real(c.mean_error)
        << " var_ratio " << csv::join_reals(c.variance_ratio) << '\n';
  }
  return kExitOk;
}

int Check(const CheckFlags& f, std::ostream& out) {
  const auto schema = csv::schema_from_name(f.schema);
  int status = kExitOk;
  for (const auto& file : f.files) {
    const auto check = csv::validate(file, schema);
    out << (check.ok ? "ok " : "INVALID ") << file << ": " << check.message << '\n';
    if (!check.ok) status = kExitDomain;
  }
  return status;
}

}  // namespace

model::MultimodalVae load_run(const std::filesystem::path& dir) {
  const auto kv = model::parse_key_values(csv::read_text(dir / "config.txt"));
  auto vae = model::MultimodalVae::init(model::config_from_map(kv));
  vae.parameters().load(dir / "checkpoint.txt");
  return vae;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multimodal VAE lab: data, training, sampling and bound checks", "mmvae"};
  app.require_subcommand(1);

  GenDataFlags gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate the synthetic two-class dataset");
  gen_cmd->add_option("--n", gen.n, "Points per class")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed, "Dataset seed");
  gen_cmd->add_option("--shape", gen.shape, "Cluster shape")
      ->check(CLI::IsMember({"gaussians", "arcs"}));
  gen_cmd->add_option("--out", gen.out, "Output CSV")->required();

  TrainFlags tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a run directory");
  train_cmd->add_option("--model", tr.model, "mmvae or mvae")
      ->required()
      ->check(CLI::IsMember({"mmvae", "mvae"}));
  train_cmd->add_option("--data", tr.data, "Dataset CSV")->required();
  train_cmd->add_option("--epochs", tr.cfg.epochs, "Training epochs")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", tr.cfg.seed, "Model, shuffle and noise seed");
  train_cmd->add_option("--out", tr.out, "Run directory")->required();
  train_cmd->add_option("--batch-size", tr.cfg.batch_size)->capture_default_str()
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", tr.cfg.adam.learning_rate)->capture_default_str()
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--beta1", tr.cfg.adam.beta1)->capture_default_str()
      ->check(CLI::Range(0.0, 0.999999));
  train_cmd->add_option("--beta2", tr.cfg.adam.beta2)->capture_default_str()
      ->check(CLI::Range(0.0, 0.999999));
  train_cmd->add_option("--adam-eps", tr.cfg.adam.eps)->capture_default_str()
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--mc-samples", tr.cfg.mc_samples)->capture_default_str()
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--eval-every", tr.cfg.eval_every)->capture_default_str()
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--eval-mc-samples", tr.cfg.eval_mc_samples)->capture_default_str()
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--collapse-samples", tr.cfg.collapse_samples)->capture_default_str()
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--hidden", tr.hidden, "Hidden layer widths")->delimiter(',');
  train_cmd->add_option("--latent-dim", tr.latent_dim)->capture_default_str()
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--likelihood", tr.likelihood, "x1 likelihood covariance")
      ->capture_default_str()
      ->check(CLI::IsMember({"isotropic", "diagonal"}));

  SampleFlags sa;
  auto* sample_cmd = app.add_subcommand("sample", "Generate x1 from a trained run");
  sample_cmd->add_option("--run", sa.run, "Run directory")->required();
  sample_cmd->add_option("--source", sa.source, "prior or label:<c>");
  sample_cmd->add_option("--n", sa.n, "Number of samples")->check(CLI::NonNegativeNumber);
  sample_cmd->add_option("--seed", sa.seed);
  sample_cmd->add_option("--emit", sa.emit, "Decoded means or likelihood samples")
      ->check(CLI::IsMember({"samples", "means"}));
  sample_cmd->add_option("--out", sa.out, "Output CSV")->required();

  VerifyFlags ve;
  auto* verify_cmd =
      app.add_subcommand("verify-theorem", "Check the MLE upper bound on random models");
  verify_cmd->add_option("--data", ve.data, "Dataset CSV")->required();
  verify_cmd->add_option("--class", ve.label, "Class label")->required();
  verify_cmd->add_option("--modality", ve.modality, "0 for x1, 1 for x2")
      ->check(CLI::Range(0, 1));
  verify_cmd->add_option("--trials", ve.trials)->capture_default_str()
      ->check(CLI::PositiveNumber);
  verify_cmd->add_option("--mc-samples", ve.mc_samples)->capture_default_str()
      ->check(CLI::PositiveNumber);
  verify_cmd->add_option("--seed", ve.seed);
  verify_cmd->add_option("--perturb-mle", ve.perturb_mle,
                         "Shift added to the MLE mean of the equality check");
  verify_cmd->add_option("--run", ve.runs, "Trained run directories to check as well");
  verify_cmd->add_option("--failure-dir", ve.failure_dir,
                         "Where parameters of failed trials are saved");
  verify_cmd->add_option("--out", ve.out, "Output CSV")->required();

  LatentFlags la;
  auto* latent_cmd = app.add_subcommand("latent", "Dump unimodal posteriors for every row");
  latent_cmd->add_option("--run", la.run, "Run directory")->required();
  latent_cmd->add_option("--data", la.data, "Dataset CSV")->required();
  latent_cmd->add_option("--samples-per-point", la.samples_per_point)->capture_default_str();
  latent_cmd->add_option("--seed", la.seed);
  latent_cmd->add_option("--out", la.out, "Output CSV")->required();

  CollapseFlags co;
  auto* collapse_cmd =
      app.add_subcommand("collapse", "Label-conditional moment comparison for a run");
  collapse_cmd->add_option("--run", co.run, "Run directory")->required();
  collapse_cmd->add_option("--data", co.data, "Dataset CSV")->required();
  collapse_cmd->add_option("--n", co.n, "Samples per class")->check(CLI::PositiveNumber);
  collapse_cmd->add_option("--seed", co.seed);
  collapse_cmd->add_option("--out", co.out, "Output CSV")->required();

  CheckFlags ch;
  auto* check_cmd = app.add_subcommand("check-csv", "Validate CSV files against a schema");
  check_cmd->add_option("--schema", ch.schema,
                        "dataset, samples, latent, runrecord, theorem or collapse")
      ->required();
  check_cmd->add_option("files", ch.files, "Files to check")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    err << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return GenData(gen, out);
    if (train_cmd->parsed()) return Train(tr, out);
    if (sample_cmd->parsed()) return Sample(sa, out);
    if (verify_cmd->parsed()) return Verify(ve, out);
    if (latent_cmd->parsed()) return Latent(la, out);
    if (collapse_cmd->parsed()) return Collapse(co, out);
    if (check_cmd->parsed()) return Check(ch, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomain;
  }
  return kExitUsage;
}

int run_main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace mmvae::cli
