// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

#include "hgen/experiment.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include "hgen/checkpoint.hpp"

namespace hgen {

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << j.dump(2) << '\n';
}

ExperimentResult run_experiment(const DatasetSchema& schema, std::span<const RawSample> samples,
                                const TrainConfig& config, const std::optional<std::filesystem::path>& out_dir,
                                const EvalOptions& eval) {
  ExperimentResult res;
  res.state = init_state(schema, samples, config);
  const TokenData data = tokenize_split(res.state, samples);
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    write_json(*out_dir / "config.json", to_json(config));
  }
  pretrain(res.state, data.train, &res.log);
  if (out_dir) save_checkpoint(*out_dir / "pretrain.ckpt", res.state);
  finetune(res.state, data.train, &res.log);
  res.report = evaluate(res.state, data, eval);
  if (out_dir) {
    save_checkpoint(*out_dir / "finetune.ckpt", res.state);
    std::ofstream log(*out_dir / "trainlog.csv");
    write_trainlog(log, schema, res.log);
    write_json(*out_dir / "report.json", to_json(res.report));
  }
  return res;
}

namespace {

struct Moments {
  std::vector<double> values;

  nlohmann::json to_json() const {
    std::vector<double> v;
    for (double x : values) {
      if (std::isfinite(x)) v.push_back(x);
    }
    nlohmann::json j;
    j["n"] = v.size();
    if (v.empty()) {
      j["mean"] = nullptr;
      j["std"] = nullptr;
      return j;
    }
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    j["mean"] = mean;
    j["std"] = v.size() > 1 ? nlohmann::json(std::sqrt(var / static_cast<double>(v.size() - 1))) : nlohmann::json(0.0);
    return j;
  }
};

}  // namespace

nlohmann::json summarize(std::span<const EvalReport> reports) {
  std::map<std::string, Moments> m;
  for (const EvalReport& r : reports) {
    m["auc"].values.push_back(r.auc);
    m["logloss"].values.push_back(r.logloss);
    m["spearman_s_vs_invloss"].values.push_back(r.spearman_s_vs_invloss);
    for (const auto& [k, v] : r.recon_acc) m["recon_acc." + k].values.push_back(v);
    for (const auto& [k, v] : r.strata_auc) m["strata_auc." + k].values.push_back(v);
    for (const auto& [k, v] : r.difficulty) m["difficulty." + k].values.push_back(v);
  }
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : m) j[k] = v.to_json();
  j["runs"] = reports.size();
  return j;
}

std::vector<EvalReport> ablate(const DatasetSchema& schema, std::span<const RawSample> samples,
                               const TrainConfig& base, std::span<const Variant> variants,
                               std::span<const std::uint64_t> seeds,
                               const std::optional<std::filesystem::path>& out_dir) {
  std::vector<EvalReport> reports;
  nlohmann::json summary = nlohmann::json::object();
  for (Variant v : variants) {
    std::vector<EvalReport> group;
    for (std::uint64_t seed : seeds) {
      TrainConfig c = base;
      c.variant = v;
      c.seed = seed;
      std::optional<std::filesystem::path> dir;
      if (out_dir) dir = *out_dir / (to_string(v) + "_seed" + std::to_string(seed));
      group.push_back(run_experiment(schema, samples, c, dir).report);
    }
    summary[to_string(v)] = summarize(group);
    reports.insert(reports.end(), group.begin(), group.end());
  }
  if (out_dir) {
    nlohmann::json runs = nlohmann::json::array();
    for (const EvalReport& r : reports) runs.push_back(to_json(r));
    write_json(*out_dir / "report.json", {{"summary", summary}, {"runs", runs}});
  }
  return reports;
}

std::vector<EvalReport> sweep_pretrain_epochs(const DatasetSchema& schema, std::span<const RawSample> samples,
                                              const TrainConfig& base, std::span<const int> epochs,
                                              std::span<const std::uint64_t> seeds,
                                              const std::optional<std::filesystem::path>& out_dir) {
  std::vector<EvalReport> reports;
  nlohmann::json summary = nlohmann::json::object();
  for (int e : epochs) {
    std::vector<EvalReport> group;
    for (std::uint64_t seed : seeds) {
      TrainConfig c = base;
      c.pretrain_epochs = e;
      c.seed = seed;
      std::optional<std::filesystem::path> dir;
      if (out_dir) dir = *out_dir / ("pretrain" + std::to_string(e) + "_seed" + std::to_string(seed));
      group.push_back(run_experiment(schema, samples, c, dir).report);
    }
    summary["pretrain_epochs=" + std::to_string(e)] = summarize(group);
    reports.insert(reports.end(), group.begin(), group.end());
  }
  if (out_dir) {
    nlohmann::json runs = nlohmann::json::array();
    for (const EvalReport& r : reports) runs.push_back(to_json(r));
    write_json(*out_dir / "report.json", {{"summary", summary}, {"runs", runs}});
  }
  return reports;
}

}  // namespace hgen
