// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

// Heterogeneous field schemas and the planted-difficulty synthetic benchmark.
//
// A sample is generated from a discrete latent state z in {0,1}^D (D =
// latent_dim, 4 by default). Each feature field k owns a deterministic map
// g_k(z); the observed value equals g_k(z) with probability rho_k and is
// uniform over the vocabulary otherwise. rho_k is solved so that the
// conditional entropy H(f_k | z) equals the field's planted entropy. The label
// is a thresholded logistic score of z, flipped with probability label_noise.
//
// Value semantics per kind:
//   Id / Categorical  token index in [0, V)
//   Numerical         positive real; exp of a normal quantile of the planted bin
//   Sequence          first-order Markov walk over [0, V); planted entropy is
//                     the per-step H(next | prev, z)

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace hgen {

enum class FieldKind { kId, kCategorical, kNumerical, kSequence, kLabel };

std::string_view to_string(FieldKind kind);
FieldKind parse_field_kind(std::string_view name);

struct FieldSpec {
  std::string name;
  FieldKind kind = FieldKind::kCategorical;
  // Vocabulary size; bin count for numerical fields; 2 for the label.
  int cardinality = 2;
  int seq_len = 0;
  double planted_entropy = 0.0;

  bool is_discrete() const {
    return kind == FieldKind::kId || kind == FieldKind::kCategorical ||
           kind == FieldKind::kLabel;
  }
};

struct DatasetSchema {
  // Feature fields first, label last.
  std::vector<FieldSpec> fields;
  std::uint64_t seed = 0;

  int num_fields() const { return static_cast<int>(fields.size()); }
  // Number of feature fields N (the label excluded).
  int num_features() const { return num_fields() - 1; }
  int label_index() const { return num_fields() - 1; }
  int max_feature_cardinality() const;
  int index_of(std::string_view name) const;

  // Throws std::invalid_argument on any invariant violation.
  void validate() const;
};

using FieldValue = std::variant<std::int32_t, double, std::vector<std::int32_t>>;

struct RawSample {
  std::vector<FieldValue> features;  // one per feature field
  int label = 0;

  friend bool operator==(const RawSample&, const RawSample&) = default;
};

struct SyntheticConfig {
  std::size_t n_samples = 10000;
  std::map<std::string, double> planted_entropy;  // per-field overrides
  double label_noise = 0.1;
  int latent_dim = 4;
  double label_base_rate = 0.25;
  std::uint64_t seed = 1;

  void validate() const;
};

struct KindRequest {
  FieldKind kind = FieldKind::kCategorical;
  int cardinality = 2;
  int seq_len = 0;
  std::string name;  // auto-generated when empty
  double planted_fraction = -1.0;  // of ln V; kind default when negative
};

DatasetSchema build_schema(const SyntheticConfig& config,
                           std::span<const KindRequest> kinds);

// Two Id fields (V=10000), three Categorical (V=20), two Numerical (B=100),
// one Sequence (V=10000, length 20) and the label.
DatasetSchema default_benchmark_schema(const SyntheticConfig& config);

// Entropy of the mixture "g with probability rho, else uniform over V".
double planted_mixture_entropy(double rho, int cardinality);
// Inverse of planted_mixture_entropy in rho; entropy must lie in [0, ln V].
double solve_keep_probability(double entropy, int cardinality);

// The generative model behind a schema. Cheap to build; all tables derive
// from schema.seed.
class PlantedModel {
 public:
  PlantedModel(const DatasetSchema& schema, const SyntheticConfig& config);

  int latent_dim() const { return latent_dim_; }
  std::uint32_t num_states() const { return 1u << latent_dim_; }
  double state_probability(std::uint32_t z) const;
  double keep_probability(int field) const { return keep_[field]; }
  // g_k(z). For sequences this is the walk's first item.
  std::int32_t planted_value(int field, std::uint32_t z) const;
  // Markov stride of a sequence field under state z.
  std::int32_t sequence_stride(int field, std::uint32_t z) const;
  // P(y=1 | z) with no label noise. 0 or 1 except for one boundary state.
  double positive_probability(std::uint32_t z) const { return positive_prob_[z]; }
  // Probability of y=1 with no label noise.
  double clean_base_rate() const;

  RawSample draw_sample(std::uint64_t sample_index, std::uint32_t* latent = nullptr) const;

  // Reference bin of a numerical value under the generating distribution.
  int reference_bin(int field, double value) const;

 private:
  DatasetSchema schema_;
  SyntheticConfig config_;
  int latent_dim_;
  std::vector<double> bit_prob_;
  std::vector<double> keep_;
  std::vector<std::vector<std::int32_t>> table_;
  std::vector<std::vector<std::int32_t>> stride_;
  std::vector<double> positive_prob_;
};

std::vector<RawSample> generate_dataset(const DatasetSchema& schema,
                                        const SyntheticConfig& config,
                                        std::vector<std::uint32_t>* latents = nullptr);

// Best achievable reconstruction accuracy for a feature field given the latent
// state, by Monte Carlo over `draws` samples of the planted model. For
// sequence fields this is the per-step next-item accuracy.
double bayes_oracle_accuracy(const DatasetSchema& schema, const SyntheticConfig& config,
                             int field_index, std::size_t draws = 100000);

}  // namespace hgen
