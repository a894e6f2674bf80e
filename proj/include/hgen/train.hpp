// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

// Two-stage training. Pretraining samples a timestep per sample, masks every
// field by its schedule and minimises the variant's aggregate of per-field
// reconstruction losses. Fine-tuning masks only the label at t = 1 and
// minimises the label term alone, which is binary cross-entropy on
//   z = cos_scale * (cos(e_{y=1}, G) - cos(e_{y=0}, G)).

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hgen/balance.hpp"
#include "hgen/batch_kernel.hpp"
#include "hgen/diffusion.hpp"
#include "hgen/encode.hpp"
#include "hgen/optimizer.hpp"
#include "hgen/params.hpp"
#include "hgen/schema.hpp"

namespace hgen {

// How the log-difficulties enter training.
//   full     self-balancing loss and difficulty-scaled queries
//   fix      equal loss weights, difficulty-scaled queries
//   std      self-balancing loss, plain queries
//   uniform  equal loss weights, plain queries, s stays at 0
enum class Variant { kFull, kFix, kStd, kUniform };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);
QueryScaling variant_scaling(Variant v);
bool variant_balanced(Variant v);

struct TrainConfig {
  Variant variant = Variant::kFull;
  double lr = 0.01;
  double finetune_lr = 0.001;  // <= 0 reuses lr
  int batch_size = 256;
  int pretrain_epochs = 10;
  int finetune_epochs = 1;
  int timesteps = 100;
  std::uint64_t seed = 1;
  double l2 = 0.0;
  int log_interval = 1;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double momentum = 0.0;
  double cos_scale = 5.0;
  int dim = 16;
  int layers = 2;
  double train_fraction = 0.8;
  int threads = 0;  // 0 keeps the OpenMP default

  void validate() const;
  OptimizerConfig optimizer_config(bool finetune) const;
  ModelConfig model_config() const;
};

nlohmann::json to_json(const TrainConfig& config);
// Missing keys keep their defaults; unknown keys throw.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

enum class Stage { kPretrain = 0, kFinetune = 1 };

struct ModelState {
  DatasetSchema schema;
  TrainConfig config;
  ModelLayout model;
  std::vector<double> params;
  std::vector<CdfBinner> binners;
  OptimizerState optimizer;
  Stage stage = Stage::kPretrain;
  std::int64_t pretrain_steps = 0;
  std::int64_t finetune_steps = 0;
  // First-epoch reference losses: running sums until the epoch closes.
  std::vector<double> ref_sum;
  std::vector<std::int64_t> ref_count;
  bool ref_recorded = false;
  // Per-field loss sums of the epoch in progress and means of the last
  // completed pretraining epoch.
  std::vector<double> epoch_sum;
  std::vector<std::int64_t> epoch_count;
  std::vector<double> last_epoch_mean;

  std::int64_t step() const { return pretrain_steps + finetune_steps; }
  std::span<const double> s() const;
  std::vector<double> reference_losses() const;
  // l / l0 for the last completed epoch; NaN where unavailable.
  std::vector<double> final_difficulty() const;

  friend bool operator==(const ModelState&, const ModelState&);
};

struct TrainRecord {
  Stage stage = Stage::kPretrain;
  std::int64_t step = 0;  // tau after the update
  int epoch = 0;
  double objective = 0.0;
  std::optional<double> label_loss;
  std::vector<std::optional<double>> loss;  // per feature field
  std::vector<double> s;                     // before the update
  std::vector<std::optional<double>> difficulty;
};

// Data of one run in token space; `train` is the first train_fraction of the
// samples and `test` the rest.
struct TokenData {
  std::vector<TokenizedSample> train;
  std::vector<TokenizedSample> test;
  std::vector<RawSample> train_raw;
  std::vector<RawSample> test_raw;
};

std::size_t train_size(std::size_t n, double train_fraction);

// Fits binners on the training split and initialises parameters.
ModelState init_state(const DatasetSchema& schema, std::span<const RawSample> samples, const TrainConfig& config);
TokenData tokenize_split(const ModelState& state, std::span<const RawSample> samples);

std::int64_t steps_per_epoch(std::size_t n_train, int batch_size);

// Training-order sample indices of one epoch.
std::vector<std::size_t> epoch_order(std::uint64_t seed, Stream stream, int epoch, std::size_t n);

// Masks each sample of `batch` for pretraining step `step`.
std::vector<TokenizedSample> pretrain_mask(const ModelState& state, std::span<const TokenizedSample> batch,
                                           std::int64_t step);
// Label masked, features visible, t = 1.
TokenizedSample ctr_mask(const ModelState& state, const TokenizedSample& clean);

TrainRecord pretrain_step(ModelState& state, std::span<const TokenizedSample> clean_batch);
TrainRecord finetune_step(ModelState& state, std::span<const TokenizedSample> clean_batch);

// Continues pretraining until all epochs are done or `until_step` pretraining
// steps have run. Records every log_interval-th step.
void pretrain(ModelState& state, std::span<const TokenizedSample> train, std::vector<TrainRecord>* log,
              std::int64_t until_step = -1);
// Switches to the fine-tuning stage (fresh optimizer state) if needed and
// continues until all epochs are done or `until_step` fine-tuning steps ran.
void finetune(ModelState& state, std::span<const TokenizedSample> train, std::vector<TrainRecord>* log,
              std::int64_t until_step = -1);

// Label logit z before scaling and the click probability
// sigmoid(cos_scale * z).
double ctr_logit(const ModelState& state, const TokenizedSample& clean);
double ctr_score(const ModelState& state, const TokenizedSample& clean);
std::vector<double> ctr_scores(const ModelState& state, std::span<const TokenizedSample> samples);

void write_trainlog_header(std::ostream& out, const DatasetSchema& schema);
void write_trainlog_row(std::ostream& out, const TrainRecord& r);
void write_trainlog(std::ostream& out, const DatasetSchema& schema, std::span<const TrainRecord> records);

}  // namespace hgen
