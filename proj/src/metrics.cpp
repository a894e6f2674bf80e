// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

#include "hgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace hgen {
namespace {

// 1-based average ranks.
std::vector<double> average_ranks(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  return rank;
}

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc: size mismatch");
  const std::vector<double> rank = average_ranks(scores);
  double pos_rank = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw std::invalid_argument("auc: labels must be 0 or 1");
    if (labels[i] == 1) {
      pos_rank += rank[i];
      ++n_pos;
    }
  }
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("auc: need both classes");
  const double np = static_cast<double>(n_pos);
  return (pos_rank - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double logloss(std::span<const double> probs, std::span<const int> labels, double eps) {
  if (probs.size() != labels.size()) throw std::invalid_argument("logloss: size mismatch");
  if (probs.empty()) throw std::invalid_argument("logloss: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], eps, 1.0 - eps);
    sum -= labels[i] == 1 ? std::log(p) : std::log(1.0 - p);
  }
  return sum / static_cast<double>(probs.size());
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("spearman: size mismatch");
  if (a.size() < 2) return nan();
  const std::vector<double> ra = average_ranks(a);
  const std::vector<double> rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return nan();
  return sab / std::sqrt(saa * sbb);
}

std::string to_string(Stratum s) {
  switch (s) {
    case Stratum::kCold:
      return "cold";
    case Stratum::kMedium:
      return "medium";
    case Stratum::kActive:
      return "active";
  }
  throw std::logic_error("unreachable");
}

Stratum stratum_of(std::int64_t count) {
  if (count < 10) return Stratum::kCold;
  if (count <= 100) return Stratum::kMedium;
  return Stratum::kActive;
}

std::map<std::string, double> stratified_auc(std::span<const double> scores, std::span<const int> labels,
                                             std::span<const std::string> strata, std::vector<std::string>* omitted) {
  if (scores.size() != labels.size() || scores.size() != strata.size()) {
    throw std::invalid_argument("stratified_auc: size mismatch");
  }
  std::map<std::string, std::pair<std::vector<double>, std::vector<int>>> groups;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    auto& g = groups[strata[i]];
    g.first.push_back(scores[i]);
    g.second.push_back(labels[i]);
  }
  std::map<std::string, double> out;
  for (const auto& [key, g] : groups) {
    const auto pos = std::count(g.second.begin(), g.second.end(), 1);
    if (pos == 0 || pos == static_cast<std::ptrdiff_t>(g.second.size())) {
      std::cerr << "warning: stratum '" << key << "' has a single class; omitted\n";
      if (omitted != nullptr) omitted->push_back(key);
      continue;
    }
    out[key] = auc(g.first, g.second);
  }
  return out;
}

CandidatePool draw_candidate_pool(const ModelLayout& model, std::span<const TokenizedSample> samples, int field,
                                  std::size_t size, std::uint64_t seed) {
  CandidatePool pool;
  pool.field = field;
  const bool sequence = model.encoder.at(field) >= 0;
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_stream(seed, Stream::kEvalPool, static_cast<std::uint64_t>(field));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
  std::set<std::vector<std::int32_t>> seen_seq;
  std::set<std::int32_t> seen_tok;
  for (std::size_t k : order) {
    if (pool.size() >= size) break;
    if (sequence) {
      if (seen_seq.insert(samples[k].sequences[field]).second) pool.sequences.push_back(samples[k].sequences[field]);
    } else if (seen_tok.insert(samples[k].original[field]).second) {
      pool.tokens.push_back(samples[k].original[field]);
    }
  }
  return pool;
}

double reconstruction_accuracy(const ModelState& st, std::span<const TokenizedSample> samples, int field,
                               const CandidatePool& pool) {
  if (pool.size() == 0) throw std::invalid_argument("reconstruction_accuracy: empty pool");
  if (samples.empty()) throw std::invalid_argument("reconstruction_accuracy: no samples");
  const ModelLayout& model = st.model;
  const std::span<const double> params(st.params);
  const bool sequence = model.encoder.at(field) >= 0;
  const ConstMatrixMap table = model.params.map(params, model.table[field]);
  std::vector<RowVector> pool_emb(pool.size());
  for (std::size_t c = 0; c < pool.size(); ++c) {
    pool_emb[c] = sequence ? encode_sequence(pool.sequences[c], model, params, field)
                           : RowVector(table.row(pool.tokens[c]));
  }
  // Candidates are taken in value order, not pool order, so the result does
  // not depend on how the pool was shuffled.
  std::vector<std::size_t> by_value(pool.size());
  std::iota(by_value.begin(), by_value.end(), std::size_t{0});
  std::sort(by_value.begin(), by_value.end(), [&](std::size_t a, std::size_t b) {
    return sequence ? pool.sequences[a] < pool.sequences[b] : pool.tokens[a] < pool.tokens[b];
  });
  const QueryScaling scaling = variant_scaling(st.config.variant);
  const std::size_t others = pool.size() - 1;
  std::vector<std::uint8_t> hit(samples.size(), 0);
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const TokenizedSample& clean = samples[i];
    TokenizedSample x = clean;
    std::fill(x.masked.begin(), x.masked.end(), 0);
    x.tokens = x.original;
    x.masked[field] = 1;
    x.tokens[field] = model.mask_row[field];
    x.t = 1;
    const RowVector h = denoise_sample(x, model, params, scaling).row(field);
    const RowVector truth =
        sequence ? encode_sequence(clean.sequences[field], model, params, field) : RowVector(table.row(clean.original[field]));
    const double best = cosine(truth, h);
    bool ok = true;
    std::size_t used = 0;
    for (std::size_t k = 0; k < pool.size() && used < others; ++k) {
      const std::size_t c = by_value[k];
      const bool same = sequence ? pool.sequences[c] == clean.sequences[field] : pool.tokens[c] == clean.original[field];
      if (same) continue;
      ++used;
      if (cosine(pool_emb[c], h) >= best) {
        ok = false;
        break;
      }
    }
    hit[i] = ok ? 1 : 0;
  }
  const auto hits = std::count(hit.begin(), hit.end(), std::uint8_t{1});
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

std::vector<std::string> user_strata(const DatasetSchema& schema, std::span<const RawSample> train,
                                     std::span<const RawSample> eval, int user_field) {
  const FieldKind kind = schema.fields.at(user_field).kind;
  if (kind != FieldKind::kId && kind != FieldKind::kCategorical) {
    throw std::invalid_argument("user_strata: user field must be a token field");
  }
  std::unordered_map<std::int32_t, std::int64_t> counts;
  for (const RawSample& s : train) ++counts[std::get<std::int32_t>(s.features[user_field])];
  std::vector<std::string> out;
  out.reserve(eval.size());
  for (const RawSample& s : eval) {
    const auto it = counts.find(std::get<std::int32_t>(s.features[user_field]));
    out.push_back(to_string(stratum_of(it == counts.end() ? 0 : it->second)));
  }
  return out;
}

EvalReport evaluate(const ModelState& st, const TokenData& data, const EvalOptions& options) {
  EvalReport r;
  r.variant = to_string(st.config.variant);
  r.seed = st.config.seed;
  r.steps = st.step();
  const std::vector<double> scores = ctr_scores(st, data.test);
  std::vector<int> labels(data.test_raw.size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = data.test_raw[i].label;
  r.auc = auc(scores, labels);
  r.logloss = logloss(scores, labels);

  const DatasetSchema& schema = st.schema;
  const std::span<const double> s = st.s();
  std::vector<double> weight, inv_loss;
  const std::vector<double> d = st.final_difficulty();
  for (int i = 0; i < schema.num_features(); ++i) {
    const std::string& name = schema.fields[i].name;
    const CandidatePool pool = draw_candidate_pool(st.model, data.test, i, options.pool_size, st.config.seed);
    r.recon_acc[name] = reconstruction_accuracy(st, data.test, i, pool);
    r.s[name] = s[i];
    const double l = i < static_cast<int>(st.last_epoch_mean.size()) ? st.last_epoch_mean[i] : nan();
    r.final_loss[name] = l;
    r.difficulty[name] = d.empty() ? nan() : d[i];
    if (std::isfinite(l) && l > 0.0) {
      weight.push_back(std::exp(-s[i]));
      inv_loss.push_back(1.0 / l);
    }
  }
  r.spearman_s_vs_invloss = spearman(weight, inv_loss);

  const int user = schema.index_of(options.user_field);
  if (user >= 0) {
    const std::vector<std::string> strata = user_strata(schema, data.train_raw, data.test_raw, user);
    r.strata_auc = stratified_auc(scores, labels, strata);
    for (const std::string& k : strata) ++r.strata_size[k];
  }
  return r;
}

namespace {

nlohmann::json number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

double read_number(const nlohmann::json& j) { return j.is_null() ? nan() : j.get<double>(); }

nlohmann::json number_map(const std::map<std::string, double>& m) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : m) j[k] = number(v);
  return j;
}

std::map<std::string, double> read_number_map(const nlohmann::json& j) {
  std::map<std::string, double> m;
  for (const auto& [k, v] : j.items()) m[k] = read_number(v);
  return m;
}

}  // namespace

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["variant"] = r.variant;
  j["seed"] = r.seed;
  j["steps"] = r.steps;
  j["auc"] = number(r.auc);
  j["logloss"] = number(r.logloss);
  j["recon_acc"] = number_map(r.recon_acc);
  j["spearman_s_vs_invloss"] = number(r.spearman_s_vs_invloss);
  j["strata_auc"] = number_map(r.strata_auc);
  j["strata_size"] = r.strata_size;
  j["s"] = number_map(r.s);
  j["final_loss"] = number_map(r.final_loss);
  j["difficulty"] = number_map(r.difficulty);
  return j;
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.variant = j.at("variant").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.steps = j.at("steps").get<std::int64_t>();
  r.auc = read_number(j.at("auc"));
  r.logloss = read_number(j.at("logloss"));
  r.recon_acc = read_number_map(j.at("recon_acc"));
  r.spearman_s_vs_invloss = read_number(j.at("spearman_s_vs_invloss"));
  r.strata_auc = read_number_map(j.at("strata_auc"));
  r.strata_size = j.at("strata_size").get<std::map<std::string, std::int64_t>>();
  r.s = read_number_map(j.at("s"));
  r.final_loss = read_number_map(j.at("final_loss"));
  r.difficulty = read_number_map(j.at("difficulty"));
  return r;
}

}  // namespace hgen
