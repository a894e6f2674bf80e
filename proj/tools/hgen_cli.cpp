// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

// Command line driver: gen-data, pretrain, finetune, eval, ablate, sweep.

#include <omp.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hgen/checkpoint.hpp"
#include "hgen/dataset_io.hpp"
#include "hgen/experiment.hpp"
#include "hgen/metrics.hpp"
#include "hgen/train.hpp"

namespace fs = std::filesystem;
using namespace hgen;

namespace {

// Train flags bound to a scratch config. Only flags given on the command line
// are copied over the config file values.
class TrainFlags {
 public:
  void attach(CLI::App* app) {
    app->add_option("--config", config_file_, "JSON file with train config keys");
    add(app, "--variant", variant_, "full | fix | std | uniform", [this](TrainConfig& c) { c.variant = parse_variant(variant_); });
    add(app, "--lr", f_.lr, "learning rate", [this](TrainConfig& c) { c.lr = f_.lr; });
    add(app, "--finetune-lr", f_.finetune_lr, "fine-tuning learning rate (<= 0 reuses --lr)",
        [this](TrainConfig& c) { c.finetune_lr = f_.finetune_lr; });
    add(app, "--batch-size", f_.batch_size, "samples per step", [this](TrainConfig& c) { c.batch_size = f_.batch_size; });
    add(app, "--pretrain-epochs", f_.pretrain_epochs, "pretraining epochs",
        [this](TrainConfig& c) { c.pretrain_epochs = f_.pretrain_epochs; });
    add(app, "--finetune-epochs", f_.finetune_epochs, "fine-tuning epochs",
        [this](TrainConfig& c) { c.finetune_epochs = f_.finetune_epochs; });
    add(app, "--timesteps", f_.timesteps, "diffusion steps T", [this](TrainConfig& c) { c.timesteps = f_.timesteps; });
    add(app, "--seed", f_.seed, "run seed", [this](TrainConfig& c) { c.seed = f_.seed; });
    add(app, "--l2", f_.l2, "L2 coefficient on network weights", [this](TrainConfig& c) { c.l2 = f_.l2; });
    add(app, "--log-interval", f_.log_interval, "steps between trainlog rows",
        [this](TrainConfig& c) { c.log_interval = f_.log_interval; });
    add(app, "--optimizer", optimizer_, "sgd | adam",
        [this](TrainConfig& c) { c.optimizer = parse_optimizer_kind(optimizer_); });
    add(app, "--momentum", f_.momentum, "SGD momentum", [this](TrainConfig& c) { c.momentum = f_.momentum; });
    add(app, "--cos-scale", f_.cos_scale, "logit scale on cosine scores",
        [this](TrainConfig& c) { c.cos_scale = f_.cos_scale; });
    add(app, "--dim", f_.dim, "embedding width", [this](TrainConfig& c) { c.dim = f_.dim; });
    add(app, "--layers", f_.layers, "denoiser blocks", [this](TrainConfig& c) { c.layers = f_.layers; });
    add(app, "--train-fraction", f_.train_fraction, "leading share of samples used for training",
        [this](TrainConfig& c) { c.train_fraction = f_.train_fraction; });
    add(app, "--threads", f_.threads, "OpenMP threads (0 = default)", [this](TrainConfig& c) { c.threads = f_.threads; });
  }

  TrainConfig resolve(TrainConfig base = {}) const {
    if (!config_file_.empty()) {
      std::ifstream in(config_file_);
      if (!in) throw std::runtime_error("cannot open " + config_file_);
      base = train_config_from_json(nlohmann::json::parse(in), base);
    }
    apply(base);
    base.validate();
    return base;
  }

  void apply(TrainConfig& c) const {
    for (const auto& [opt, fn] : setters_) {
      if (opt->count() > 0) fn(c);
    }
  }

 private:
  template <typename T>
  void add(CLI::App* app, const std::string& name, T& target, const std::string& help,
           std::function<void(TrainConfig&)> fn) {
    setters_.emplace_back(app->add_option(name, target, help), std::move(fn));
  }

  TrainConfig f_;
  std::string variant_ = "full";
  std::string optimizer_ = "adam";
  std::string config_file_;
  std::vector<std::pair<CLI::Option*, std::function<void(TrainConfig&)>>> setters_;
};

void set_threads(const TrainConfig& c) {
  if (c.threads > 0) omp_set_num_threads(c.threads);
}

void write_log(const fs::path& path, const DatasetSchema& schema, const std::vector<TrainRecord>& log, bool append) {
  const bool header = !append || !fs::exists(path);
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  if (header) write_trainlog_header(out, schema);
  for (const TrainRecord& r : log) write_trainlog_row(out, r);
}

std::vector<Variant> parse_variants(const std::vector<std::string>& names) {
  std::vector<Variant> out;
  for (const std::string& n : names) out.push_back(parse_variant(n));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hgen: heterogeneous-field generative CTR pretraining"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "write a synthetic planted-entropy dataset");
  std::string gen_out;
  SyntheticConfig syn;
  std::vector<std::string> entropy_overrides;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--n-samples", syn.n_samples, "number of samples");
  gen->add_option("--seed", syn.seed, "generator seed");
  gen->add_option("--label-noise", syn.label_noise, "label flip probability");
  gen->add_option("--base-rate", syn.label_base_rate, "target click rate");
  gen->add_option("--latent-dim", syn.latent_dim, "latent bits");
  gen->add_option("--entropy", entropy_overrides, "field=nats planted entropy override (repeatable)");

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "pretrain from scratch or resume a checkpoint");
  std::string pre_data, pre_out, pre_resume;
  std::int64_t pre_steps = -1;
  TrainFlags pre_flags;
  pre->add_option("--data", pre_data, "dataset directory")->required();
  pre->add_option("--out", pre_out, "output directory")->required();
  pre->add_option("--resume", pre_resume, "checkpoint to continue from");
  pre->add_option("--steps", pre_steps, "stop after this many pretraining steps in total");
  pre_flags.attach(pre);

  // finetune
  auto* fin = app.add_subcommand("finetune", "fine-tune a pretrained checkpoint on the label");
  std::string fin_data, fin_out, fin_ckpt;
  std::int64_t fin_steps = -1;
  TrainFlags fin_flags;
  fin->add_option("--data", fin_data, "dataset directory")->required();
  fin->add_option("--checkpoint", fin_ckpt, "pretrained or partially fine-tuned checkpoint")->required();
  fin->add_option("--out", fin_out, "output directory")->required();
  fin->add_option("--steps", fin_steps, "stop after this many fine-tuning steps in total");
  fin_flags.attach(fin);

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on the held-out split");
  std::string ev_data, ev_ckpt, ev_out;
  EvalOptions ev_opts;
  ev->add_option("--data", ev_data, "dataset directory")->required();
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint")->required();
  ev->add_option("--out", ev_out, "output directory")->required();
  ev->add_option("--pool-size", ev_opts.pool_size, "reconstruction candidate pool size");
  ev->add_option("--user-field", ev_opts.user_field, "field defining user activity strata");

  // ablate
  auto* abl = app.add_subcommand("ablate", "train and evaluate variants over seeds");
  std::string abl_data, abl_out;
  std::vector<std::string> abl_variants{"full", "fix", "std", "uniform"};
  std::vector<std::uint64_t> abl_seeds{1, 2, 3, 4, 5};
  TrainFlags abl_flags;
  abl->add_option("--data", abl_data, "dataset directory")->required();
  abl->add_option("--out", abl_out, "output directory")->required();
  abl->add_option("--variants", abl_variants, "variants to run")->delimiter(',');
  abl->add_option("--seeds", abl_seeds, "run seeds")->delimiter(',');
  abl_flags.attach(abl);

  // sweep
  auto* swp = app.add_subcommand("sweep", "vary the pretraining epoch budget");
  std::string swp_data, swp_out;
  std::vector<int> swp_epochs{1, 3, 5};
  std::vector<std::uint64_t> swp_seeds{1};
  TrainFlags swp_flags;
  swp->add_option("--data", swp_data, "dataset directory")->required();
  swp->add_option("--out", swp_out, "output directory")->required();
  swp->add_option("--epochs", swp_epochs, "pretraining epoch budgets")->delimiter(',');
  swp->add_option("--seeds", swp_seeds, "run seeds")->delimiter(',');
  swp_flags.attach(swp);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      for (const std::string& kv : entropy_overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--entropy expects field=value");
        syn.planted_entropy[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
      }
      syn.validate();
      const DatasetSchema schema = default_benchmark_schema(syn);
      save_dataset(gen_out, schema, generate_dataset(schema, syn));
      std::cout << "wrote " << syn.n_samples << " samples to " << gen_out << '\n';
    } else if (pre->parsed()) {
      const LoadedDataset ds = load_dataset(pre_data);
      fs::create_directories(pre_out);
      ModelState st;
      if (pre_resume.empty()) {
        st = init_state(ds.schema, ds.samples, pre_flags.resolve());
      } else {
        st = load_checkpoint(pre_resume, &ds.schema);
      }
      set_threads(st.config);
      const TokenData data = tokenize_split(st, ds.samples);
      std::vector<TrainRecord> log;
      pretrain(st, data.train, &log, pre_steps);
      save_checkpoint(fs::path(pre_out) / "pretrain.ckpt", st);
      write_json(fs::path(pre_out) / "config.json", to_json(st.config));
      write_log(fs::path(pre_out) / "trainlog.csv", st.schema, log, !pre_resume.empty());
      std::cout << "pretrained to step " << st.pretrain_steps << '\n';
    } else if (fin->parsed()) {
      const LoadedDataset ds = load_dataset(fin_data);
      fs::create_directories(fin_out);
      ModelState st = load_checkpoint(fin_ckpt, &ds.schema);
      const TrainConfig before = st.config;
      st.config = fin_flags.resolve(st.config);
      if (st.config.dim != before.dim || st.config.layers != before.layers ||
          st.config.timesteps != before.timesteps || st.config.variant != before.variant ||
          st.config.train_fraction != before.train_fraction) {
        throw std::invalid_argument("fine-tuning cannot change the architecture, variant or split");
      }
      set_threads(st.config);
      const TokenData data = tokenize_split(st, ds.samples);
      std::vector<TrainRecord> log;
      finetune(st, data.train, &log, fin_steps);
      save_checkpoint(fs::path(fin_out) / "finetune.ckpt", st);
      write_log(fs::path(fin_out) / "trainlog.csv", st.schema, log, true);
      std::cout << "fine-tuned to step " << st.finetune_steps << '\n';
    } else if (ev->parsed()) {
      const LoadedDataset ds = load_dataset(ev_data);
      fs::create_directories(ev_out);
      const ModelState st = load_checkpoint(ev_ckpt, &ds.schema);
      set_threads(st.config);
      const EvalReport r = evaluate(st, tokenize_split(st, ds.samples), ev_opts);
      write_json(fs::path(ev_out) / "report.json", to_json(r));
      std::cout << to_json(r).dump(2) << '\n';
    } else if (abl->parsed()) {
      const LoadedDataset ds = load_dataset(abl_data);
      const TrainConfig base = abl_flags.resolve();
      set_threads(base);
      const std::vector<Variant> variants = parse_variants(abl_variants);
      ablate(ds.schema, ds.samples, base, variants, abl_seeds, fs::path(abl_out));
      std::cout << "wrote " << (fs::path(abl_out) / "report.json").string() << '\n';
    } else if (swp->parsed()) {
      const LoadedDataset ds = load_dataset(swp_data);
      const TrainConfig base = swp_flags.resolve();
      set_threads(base);
      sweep_pretrain_epochs(ds.schema, ds.samples, base, swp_epochs, swp_seeds, fs::path(swp_out));
      std::cout << "wrote " << (fs::path(swp_out) / "report.json").string() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
