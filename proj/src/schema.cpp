// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

#include "hgen/schema.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include <boost/math/special_functions/erf.hpp>

#include "hgen/rng.hpp"

namespace hgen {
namespace {

constexpr double kEntropySlack = 1e-9;

double default_fraction(FieldKind kind) {
  switch (kind) {
    case FieldKind::kId: return 0.7;
    case FieldKind::kCategorical: return 0.3;
    case FieldKind::kNumerical: return 0.4;
    case FieldKind::kSequence: return 0.5;
    case FieldKind::kLabel: return 0.0;
  }
  return 0.0;
}

std::string_view name_prefix(FieldKind kind) {
  switch (kind) {
    case FieldKind::kId: return "id";
    case FieldKind::kCategorical: return "cat";
    case FieldKind::kNumerical: return "num";
    case FieldKind::kSequence: return "seq";
    case FieldKind::kLabel: return "label";
  }
  return "field";
}

double normal_quantile(double p) { return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p); }
double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

std::string_view to_string(FieldKind kind) {
  switch (kind) {
    case FieldKind::kId: return "id";
    case FieldKind::kCategorical: return "categorical";
    case FieldKind::kNumerical: return "numerical";
    case FieldKind::kSequence: return "sequence";
    case FieldKind::kLabel: return "label";
  }
  return "unknown";
}

FieldKind parse_field_kind(std::string_view name) {
  if (name == "id") return FieldKind::kId;
  if (name == "categorical") return FieldKind::kCategorical;
  if (name == "numerical") return FieldKind::kNumerical;
  if (name == "sequence") return FieldKind::kSequence;
  if (name == "label") return FieldKind::kLabel;
  throw std::invalid_argument("unknown field kind: " + std::string(name));
}

int DatasetSchema::max_feature_cardinality() const {
  int v = 0;
  for (int i = 0; i < num_features(); ++i) v = std::max(v, fields[i].cardinality);
  return v;
}

int DatasetSchema::index_of(std::string_view name) const {
  for (int i = 0; i < num_fields(); ++i) {
    if (fields[i].name == name) return i;
  }
  return -1;
}

void DatasetSchema::validate() const {
  if (fields.size() < 2) throw std::invalid_argument("schema needs a feature field and a label");
  std::set<std::string> names;
  int labels = 0;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const FieldSpec& f = fields[i];
    if (f.name.empty()) throw std::invalid_argument("field name must not be empty");
    if (!names.insert(f.name).second) throw std::invalid_argument("duplicate field name: " + f.name);
    if (f.cardinality < 2) {
      throw std::invalid_argument("field " + f.name + ": cardinality must be >= 2");
    }
    if (f.kind == FieldKind::kSequence && f.seq_len < 1) {
      throw std::invalid_argument("field " + f.name + ": sequence needs seq_len >= 1");
    }
    if (f.kind != FieldKind::kSequence && f.seq_len != 0) {
      throw std::invalid_argument("field " + f.name + ": seq_len only applies to sequences");
    }
    if (f.planted_entropy < 0.0 ||
        f.planted_entropy > std::log(static_cast<double>(f.cardinality)) + kEntropySlack) {
      throw std::invalid_argument("field " + f.name + ": planted_entropy outside [0, ln V]");
    }
    if (f.kind == FieldKind::kLabel) {
      ++labels;
      if (i + 1 != fields.size()) throw std::invalid_argument("label must be the last field");
      if (f.cardinality != 2) throw std::invalid_argument("label cardinality must be 2");
    }
  }
  if (labels != 1) throw std::invalid_argument("schema must contain exactly one label");
}

void SyntheticConfig::validate() const {
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  if (!(label_noise >= 0.0 && label_noise <= 0.5)) {
    throw std::invalid_argument("label_noise must lie in [0, 0.5]");
  }
  if (latent_dim < 1 || latent_dim > 16) throw std::invalid_argument("latent_dim must lie in [1, 16]");
  if (!(label_base_rate > 0.0 && label_base_rate < 1.0)) {
    throw std::invalid_argument("label_base_rate must lie in (0, 1)");
  }
}

DatasetSchema build_schema(const SyntheticConfig& config, std::span<const KindRequest> kinds) {
  config.validate();
  DatasetSchema schema;
  schema.seed = config.seed;
  std::map<FieldKind, int> counters;
  const KindRequest* label_request = nullptr;
  for (const KindRequest& k : kinds) {
    if (k.kind == FieldKind::kLabel) {
      if (label_request != nullptr) throw std::invalid_argument("schema must contain exactly one label");
      label_request = &k;
      continue;
    }
    FieldSpec f;
    f.kind = k.kind;
    f.cardinality = k.cardinality;
    f.seq_len = k.seq_len;
    f.name = k.name.empty() ? std::string(name_prefix(k.kind)) + "_" + std::to_string(counters[k.kind]++)
                            : k.name;
    const double fraction = k.planted_fraction >= 0.0 ? k.planted_fraction : default_fraction(k.kind);
    f.planted_entropy = k.cardinality >= 2 ? fraction * std::log(static_cast<double>(k.cardinality)) : 0.0;
    schema.fields.push_back(std::move(f));
  }
  FieldSpec label;
  label.kind = FieldKind::kLabel;
  label.cardinality = 2;
  label.name = label_request != nullptr && !label_request->name.empty() ? label_request->name : "label";
  schema.fields.push_back(std::move(label));

  for (const auto& [name, entropy] : config.planted_entropy) {
    const int idx = schema.index_of(name);
    if (idx < 0 || idx == schema.label_index()) {
      throw std::invalid_argument("planted_entropy override for unknown feature field: " + name);
    }
    schema.fields[idx].planted_entropy = entropy;
  }
  schema.validate();
  return schema;
}

DatasetSchema default_benchmark_schema(const SyntheticConfig& config) {
  const std::vector<KindRequest> kinds = {
      {FieldKind::kId, 10000, 0, "user_id", 0.6},
      {FieldKind::kId, 10000, 0, "item_id", 0.95},
      {FieldKind::kCategorical, 20, 0, "cat_0", 0.0},
      {FieldKind::kCategorical, 20, 0, "cat_1", 0.3},
      {FieldKind::kCategorical, 20, 0, "cat_2", 0.6},
      {FieldKind::kNumerical, 100, 0, "num_0", 0.2},
      {FieldKind::kNumerical, 100, 0, "num_1", 0.5},
      {FieldKind::kSequence, 10000, 20, "history", 0.5},
      {FieldKind::kLabel, 2, 0, "label", 0.0},
  };
  return build_schema(config, kinds);
}

double planted_mixture_entropy(double rho, int cardinality) {
  const double v = cardinality;
  const double off = (1.0 - rho) / v;
  const double on = rho + off;
  double h = 0.0;
  if (on > 0.0) h -= on * std::log(on);
  if (off > 0.0) h -= (v - 1.0) * off * std::log(off);
  return h;
}

double solve_keep_probability(double entropy, int cardinality) {
  const double hmax = std::log(static_cast<double>(cardinality));
  if (entropy <= 0.0) return 1.0;
  if (entropy >= hmax) return 0.0;
  double lo = 0.0;  // entropy(lo) = hmax
  double hi = 1.0;  // entropy(hi) = 0
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (planted_mixture_entropy(mid, cardinality) > entropy) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

PlantedModel::PlantedModel(const DatasetSchema& schema, const SyntheticConfig& config)
    : schema_(schema), config_(config), latent_dim_(config.latent_dim) {
  schema_.validate();
  config_.validate();
  const std::uint32_t states = num_states();
  Rng rng = make_stream(schema_.seed, Stream::kLatent);
  bit_prob_.resize(latent_dim_);
  for (double& p : bit_prob_) p = 0.55 + 0.2 * uniform01(rng);

  const int nf = schema_.num_features();
  keep_.assign(nf, 1.0);
  table_.assign(nf, {});
  stride_.assign(nf, {});
  for (int k = 0; k < nf; ++k) {
    const FieldSpec& f = schema_.fields[k];
    keep_[k] = solve_keep_probability(f.planted_entropy, f.cardinality);
    Rng trng = make_stream(schema_.seed, Stream::kSchema, static_cast<std::uint64_t>(k));
    std::vector<std::int32_t>& table = table_[k];
    table.resize(states);
    if (f.kind == FieldKind::kId && static_cast<std::uint32_t>(f.cardinality) >= states) {
      // Injective: each latent state owns a distinct identity.
      std::vector<std::int32_t> ids(f.cardinality);
      std::iota(ids.begin(), ids.end(), 0);
      for (std::uint32_t i = 0; i < states; ++i) {
        const std::uint64_t j = i + uniform_index(trng, ids.size() - i);
        std::swap(ids[i], ids[j]);
        table[i] = ids[i];
      }
    } else {
      for (auto& v : table) v = static_cast<std::int32_t>(uniform_index(trng, f.cardinality));
    }
    if (f.kind == FieldKind::kSequence) {
      stride_[k].resize(states);
      for (auto& v : stride_[k]) {
        v = 1 + static_cast<std::int32_t>(uniform_index(trng, f.cardinality - 1));
      }
    }
  }

  // Label: logistic score of the signed latent bits, thresholded so the
  // clean base rate hits the target. States above the threshold are always
  // positive; the one straddling it is positive with a fractional probability.
  std::vector<double> w(latent_dim_);
  for (double& x : w) x = standard_normal(rng);
  std::vector<double> prob(states);
  std::vector<std::uint32_t> order(states);
  for (std::uint32_t z = 0; z < states; ++z) {
    double score = 0.0;
    for (int j = 0; j < latent_dim_; ++j) score += w[j] * (((z >> j) & 1u) ? 1.0 : -1.0);
    prob[z] = 1.0 / (1.0 + std::exp(-score));
    order[z] = z;
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return prob[a] > prob[b]; });
  positive_prob_.assign(states, 0.0);
  double mass = 0.0;
  for (std::uint32_t z : order) {
    const double p = state_probability(z);
    const double need = config_.label_base_rate - mass;
    if (need <= 0.0) break;
    positive_prob_[z] = std::min(1.0, need / p);
    mass += p * positive_prob_[z];
  }
}

double PlantedModel::state_probability(std::uint32_t z) const {
  double p = 1.0;
  for (int j = 0; j < latent_dim_; ++j) p *= ((z >> j) & 1u) ? bit_prob_[j] : 1.0 - bit_prob_[j];
  return p;
}

std::int32_t PlantedModel::planted_value(int field, std::uint32_t z) const { return table_[field][z]; }

std::int32_t PlantedModel::sequence_stride(int field, std::uint32_t z) const {
  return stride_[field][z];
}

double PlantedModel::clean_base_rate() const {
  double rate = 0.0;
  for (std::uint32_t z = 0; z < num_states(); ++z) {
    rate += positive_prob_[z] * state_probability(z);
  }
  return rate;
}

RawSample PlantedModel::draw_sample(std::uint64_t sample_index, std::uint32_t* latent) const {
  Rng rng = make_stream(schema_.seed, Stream::kSample, sample_index);
  std::uint32_t z = 0;
  for (int j = 0; j < latent_dim_; ++j) {
    if (uniform01(rng) < bit_prob_[j]) z |= 1u << j;
  }
  if (latent != nullptr) *latent = z;

  RawSample s;
  const int nf = schema_.num_features();
  s.features.reserve(nf);
  auto token = [&](int k, std::int32_t planted) -> std::int32_t {
    const std::uint64_t v = schema_.fields[k].cardinality;
    // Draw both variates unconditionally so the stream layout is fixed.
    const double u = uniform01(rng);
    const auto noise = static_cast<std::int32_t>(uniform_index(rng, v));
    return u < keep_[k] ? planted : noise;
  };
  for (int k = 0; k < nf; ++k) {
    const FieldSpec& f = schema_.fields[k];
    switch (f.kind) {
      case FieldKind::kId:
      case FieldKind::kCategorical:
        s.features.emplace_back(token(k, table_[k][z]));
        break;
      case FieldKind::kNumerical: {
        const double u = uniform01(rng);
        const double jitter = uniform01(rng);
        const double noise = standard_normal(rng);
        double x;
        if (u < keep_[k]) {
          double p = (table_[k][z] + jitter) / f.cardinality;
          p = std::clamp(p, 1e-12, 1.0 - 1e-12);
          x = normal_quantile(p);
        } else {
          x = noise;
        }
        s.features.emplace_back(std::exp(x));
        break;
      }
      case FieldKind::kSequence: {
        const int lo = (f.seq_len + 1) / 2;
        const int len = lo + static_cast<int>(uniform_index(rng, f.seq_len - lo + 1));
        std::vector<std::int32_t> seq(len);
        seq[0] = token(k, table_[k][z]);
        for (int p = 1; p < len; ++p) {
          seq[p] = token(k, (seq[p - 1] + stride_[k][z]) % f.cardinality);
        }
        s.features.emplace_back(std::move(seq));
        break;
      }
      case FieldKind::kLabel:
        break;
    }
  }
  const int clean = uniform01(rng) < positive_prob_[z] ? 1 : 0;
  const bool flip = uniform01(rng) < config_.label_noise;
  s.label = clean ^ (flip ? 1 : 0);
  return s;
}

int PlantedModel::reference_bin(int field, double value) const {
  const int b = schema_.fields[field].cardinality;
  const double u = normal_cdf(std::log(value));
  return std::min(static_cast<int>(std::floor(b * u)), b - 1);
}

std::vector<RawSample> generate_dataset(const DatasetSchema& schema, const SyntheticConfig& config,
                                        std::vector<std::uint32_t>* latents) {
  const PlantedModel model(schema, config);
  const auto n = static_cast<std::int64_t>(config.n_samples);
  std::vector<RawSample> out(n);
  if (latents != nullptr) latents->assign(n, 0);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    std::uint32_t z = 0;
    out[i] = model.draw_sample(static_cast<std::uint64_t>(i), &z);
    if (latents != nullptr) (*latents)[i] = z;
  }
  return out;
}

double bayes_oracle_accuracy(const DatasetSchema& schema, const SyntheticConfig& config,
                             int field_index, std::size_t draws) {
  if (field_index < 0 || field_index >= schema.num_features()) {
    throw std::invalid_argument("bayes_oracle_accuracy: not a feature field");
  }
  const PlantedModel model(schema, config);
  const FieldSpec& f = schema.fields[field_index];
  std::size_t hits = 0;
  std::size_t total = 0;
  // Independent of the dataset's sample streams.
  const std::uint64_t offset = derive_seed(schema.seed, Stream::kOracle);
  for (std::size_t n = 0; n < draws; ++n) {
    std::uint32_t z = 0;
    const RawSample s = model.draw_sample(offset + n, &z);
    const FieldValue& v = s.features[field_index];
    switch (f.kind) {
      case FieldKind::kId:
      case FieldKind::kCategorical:
        hits += std::get<std::int32_t>(v) == model.planted_value(field_index, z);
        ++total;
        break;
      case FieldKind::kNumerical:
        hits += model.reference_bin(field_index, std::get<double>(v)) ==
                model.planted_value(field_index, z);
        ++total;
        break;
      case FieldKind::kSequence: {
        const auto& seq = std::get<std::vector<std::int32_t>>(v);
        std::int32_t expect = model.planted_value(field_index, z);
        for (std::int32_t tok : seq) {
          hits += tok == expect;
          ++total;
          expect = (tok + model.sequence_stride(field_index, z)) % f.cardinality;
        }
        break;
      }
      case FieldKind::kLabel:
        break;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace hgen
