// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hgen/train.hpp"

namespace hgen {

// Mann-Whitney statistic with average ranks for ties. Throws
// std::invalid_argument unless both classes are present.
double auc(std::span<const double> scores, std::span<const int> labels);

// Mean binary cross-entropy with probabilities clipped to [eps, 1 - eps].
double logloss(std::span<const double> probs, std::span<const int> labels, double eps = 1e-7);

// Spearman rank correlation (average ranks for ties).
double spearman(std::span<const double> a, std::span<const double> b);

enum class Stratum { kCold, kMedium, kActive };
std::string to_string(Stratum s);
// <10 cold, 10..100 medium, >100 active.
Stratum stratum_of(std::int64_t count);

// AUC per stratum key. Strata with a single class are omitted and named in
// `omitted` when given.
std::map<std::string, double> stratified_auc(std::span<const double> scores, std::span<const int> labels,
                                             std::span<const std::string> strata,
                                             std::vector<std::string>* omitted = nullptr);

// Candidate values of one field: token ids, or whole sequences for sequence
// fields.
struct CandidatePool {
  int field = -1;
  std::vector<std::int32_t> tokens;
  std::vector<std::vector<std::int32_t>> sequences;

  std::size_t size() const { return sequences.empty() ? tokens.size() : sequences.size(); }
};

// Up to `size` distinct values of `field` from `samples`, visited in a
// seeded random order.
CandidatePool draw_candidate_pool(const ModelLayout& model, std::span<const TokenizedSample> samples, int field,
                                  std::size_t size, std::uint64_t seed);

// Masks only `field` (t = 1) and scores the true value plus the |pool| - 1
// smallest pool values (by token or item list) that differ from it, by cosine
// to the context. A hit needs the true value to score strictly highest.
// Throws on an empty pool.
double reconstruction_accuracy(const ModelState& state, std::span<const TokenizedSample> samples, int field,
                               const CandidatePool& pool);

// Per-sample stratum keys from the training-split frequency of a user field.
std::vector<std::string> user_strata(const DatasetSchema& schema, std::span<const RawSample> train,
                                     std::span<const RawSample> eval, int user_field);

struct EvalReport {
  std::string variant;
  std::uint64_t seed = 0;
  double auc = 0.0;
  double logloss = 0.0;
  std::map<std::string, double> recon_acc;
  double spearman_s_vs_invloss = 0.0;
  std::map<std::string, double> strata_auc;
  std::map<std::string, std::int64_t> strata_size;
  std::map<std::string, double> s;
  std::map<std::string, double> final_loss;
  std::map<std::string, double> difficulty;
  std::int64_t steps = 0;
};

struct EvalOptions {
  std::size_t pool_size = 256;
  std::string user_field = "user_id";
};

EvalReport evaluate(const ModelState& state, const TokenData& data, const EvalOptions& options = {});

nlohmann::json to_json(const EvalReport& r);
EvalReport eval_report_from_json(const nlohmann::json& j);

}  // namespace hgen
