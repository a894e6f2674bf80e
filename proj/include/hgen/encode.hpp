// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

// Type-specific field encoders: empirical-CDF binning for numerical fields,
// embedding lookup for Id / Categorical / Label, and a one-block self-attention
// encoder with mean pooling for behaviour sequences.

#pragma once

#include <span>
#include <string>
#include <vector>

#include "hgen/diffusion.hpp"
#include "hgen/params.hpp"
#include "hgen/schema.hpp"

namespace hgen {

// bin(v) = min(floor(B * F(v)), B - 1) with F(v) = #{x_j <= v} / n, the
// right-continuous empirical CDF of the training values. Stored as the B-1
// thresholds at which the bin index increments.
class CdfBinner {
 public:
  CdfBinner() = default;
  CdfBinner(std::string field, int bins, std::vector<double> thresholds);

  const std::string& field() const { return field_; }
  int bins() const { return bins_; }
  const std::vector<double>& thresholds() const { return thresholds_; }
  int bin(double value) const;

  friend bool operator==(const CdfBinner&, const CdfBinner&) = default;

 private:
  std::string field_;
  int bins_ = 0;
  std::vector<double> thresholds_;
};

CdfBinner fit_binner(std::span<const double> values, int bins, std::string field = {});

// One binner per numerical field, fitted on `train`; other fields hold an
// empty binner.
std::vector<CdfBinner> fit_binners(const DatasetSchema& schema, std::span<const RawSample> train);

// Clean (unmasked, t = 0) token view of a raw sample.
TokenizedSample tokenize(const DatasetSchema& schema, std::span<const CdfBinner> binners, const RawSample& raw);

struct SequenceTrace {
  std::vector<int> rows;
  bool padded = false;
  Matrix x, q, k, v, p, a, h;
  RowVector pooled;
};

// Self-attention over the item embeddings, residual, mean pool, linear. An
// empty sequence maps to the projection of the padding row.
RowVector encode_sequence(std::span<const std::int32_t> tokens, const ModelLayout& model,
                          std::span<const double> params, int field, SequenceTrace* trace = nullptr);

// Accumulates encoder weight gradients into `dense_grad` and appends item
// table row gradients to `rows`.
void encode_sequence_backward(const SequenceTrace& trace, const RowVector& d_out, const ModelLayout& model,
                              std::span<const double> params, int field, std::span<double> dense_grad,
                              std::vector<RowGrad>& rows);

// Field embedding of a clean sample: table row, binned table row or sequence
// encoding, by field kind. Throws std::out_of_range for out-of-vocabulary
// tokens.
RowVector embed_field(const DatasetSchema& schema, std::span<const CdfBinner> binners, const ModelLayout& model,
                      std::span<const double> params, const RawSample& raw, int field);

}  // namespace hgen
