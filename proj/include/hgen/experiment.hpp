// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

// Whole runs: pretrain, checkpoint, fine-tune, evaluate. Optionally writes
// pretrain.ckpt, finetune.ckpt, trainlog.csv, config.json and report.json to
// an output directory.

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hgen/metrics.hpp"
#include "hgen/train.hpp"

namespace hgen {

struct ExperimentResult {
  ModelState state;
  std::vector<TrainRecord> log;
  EvalReport report;
};

ExperimentResult run_experiment(const DatasetSchema& schema, std::span<const RawSample> samples,
                                const TrainConfig& config, const std::optional<std::filesystem::path>& out_dir = {},
                                const EvalOptions& eval = {});

void write_json(const std::filesystem::path& path, const nlohmann::json& j);

// Mean and sample standard deviation of report metrics over runs.
nlohmann::json summarize(std::span<const EvalReport> reports);

// Every variant under every seed; each run writes to out_dir/<variant>_seed<k>
// when out_dir is set. Returns the reports in (variant, seed) order.
std::vector<EvalReport> ablate(const DatasetSchema& schema, std::span<const RawSample> samples,
                               const TrainConfig& base, std::span<const Variant> variants,
                               std::span<const std::uint64_t> seeds,
                               const std::optional<std::filesystem::path>& out_dir = {});

// One run per pretraining epoch budget and seed, into
// out_dir/pretrain<e>_seed<k>.
std::vector<EvalReport> sweep_pretrain_epochs(const DatasetSchema& schema, std::span<const RawSample> samples,
                                              const TrainConfig& base, std::span<const int> epochs,
                                              std::span<const std::uint64_t> seeds,
                                              const std::optional<std::filesystem::path>& out_dir = {});

}  // namespace hgen
