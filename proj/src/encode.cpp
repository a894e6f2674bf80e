// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

#include "hgen/encode.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nn_ops.hpp"

namespace hgen {

CdfBinner::CdfBinner(std::string field, int bins, std::vector<double> thresholds)
    : field_(std::move(field)), bins_(bins), thresholds_(std::move(thresholds)) {
  if (bins_ < 1 || static_cast<int>(thresholds_.size()) != bins_ - 1) {
    throw std::invalid_argument("CdfBinner: need bins - 1 thresholds");
  }
  if (!std::is_sorted(thresholds_.begin(), thresholds_.end())) {
    throw std::invalid_argument("CdfBinner: thresholds must be sorted");
  }
}

int CdfBinner::bin(double value) const {
  if (!std::isfinite(value)) throw std::invalid_argument("CdfBinner: non-finite value in " + field_);
  return static_cast<int>(std::upper_bound(thresholds_.begin(), thresholds_.end(), value) -
                          thresholds_.begin());
}

CdfBinner fit_binner(std::span<const double> values, int bins, std::string field) {
  if (values.empty()) throw std::invalid_argument("fit_binner: empty training values");
  if (bins < 1) throw std::invalid_argument("fit_binner: bins must be >= 1");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<std::uint64_t>(sorted.size());
  const auto b = static_cast<std::uint64_t>(bins);
  std::vector<double> thresholds;
  thresholds.reserve(bins - 1);
  // floor(B * c / n) >= k  <=>  c >= ceil(k n / B).
  for (std::uint64_t k = 1; k < b; ++k) {
    const std::uint64_t need = (k * n + b - 1) / b;
    thresholds.push_back(sorted[need - 1]);
  }
  return CdfBinner(std::move(field), bins, std::move(thresholds));
}

std::vector<CdfBinner> fit_binners(const DatasetSchema& schema, std::span<const RawSample> train) {
  std::vector<CdfBinner> out(schema.num_fields());
  for (int k = 0; k < schema.num_features(); ++k) {
    const FieldSpec& f = schema.fields[k];
    if (f.kind != FieldKind::kNumerical) continue;
    std::vector<double> values;
    values.reserve(train.size());
    for (const RawSample& s : train) values.push_back(std::get<double>(s.features[k]));
    out[k] = fit_binner(values, f.cardinality, f.name);
  }
  return out;
}

TokenizedSample tokenize(const DatasetSchema& schema, std::span<const CdfBinner> binners, const RawSample& raw) {
  const int nf = schema.num_fields();
  TokenizedSample t;
  t.original.assign(nf, -1);
  t.sequences.resize(nf);
  t.masked.assign(nf, 0);
  for (int k = 0; k < schema.num_features(); ++k) {
    const FieldSpec& f = schema.fields[k];
    const FieldValue& v = raw.features[k];
    switch (f.kind) {
      case FieldKind::kId:
      case FieldKind::kCategorical: {
        const std::int32_t tok = std::get<std::int32_t>(v);
        if (tok < 0 || tok >= f.cardinality) throw std::out_of_range("token out of vocabulary in " + f.name);
        t.original[k] = tok;
        break;
      }
      case FieldKind::kNumerical:
        t.original[k] = binners[k].bin(std::get<double>(v));
        break;
      case FieldKind::kSequence: {
        const auto& seq = std::get<std::vector<std::int32_t>>(v);
        for (std::int32_t tok : seq) {
          if (tok < 0 || tok >= f.cardinality) throw std::out_of_range("item out of vocabulary in " + f.name);
        }
        t.sequences[k] = seq;
        break;
      }
      case FieldKind::kLabel:
        break;
    }
  }
  t.original[schema.label_index()] = raw.label;
  t.tokens = t.original;
  return t;
}

RowVector encode_sequence(std::span<const std::int32_t> tokens, const ModelLayout& model,
                          std::span<const double> params, int field, SequenceTrace* trace) {
  const SequenceEncoderSlots& s = model.sequence_encoders.at(model.encoder[field]);
  const ParamLayout& pl = model.params;
  const ConstMatrixMap table = pl.map(params, model.table[field]);
  const ConstMatrixMap wp = pl.map(params, s.wp);
  const ConstMatrixMap bp = pl.map(params, s.bp);
  SequenceTrace local;
  SequenceTrace& tr = trace != nullptr ? *trace : local;

  if (tokens.empty()) {
    tr.padded = true;
    tr.rows = {model.pad_row[field]};
    tr.pooled = table.row(model.pad_row[field]);
    return tr.pooled * wp + bp;
  }
  tr.padded = false;
  const auto len = static_cast<Eigen::Index>(tokens.size());
  const Eigen::Index d = table.cols();
  tr.rows.assign(tokens.begin(), tokens.end());
  tr.x.resize(len, d);
  for (Eigen::Index r = 0; r < len; ++r) tr.x.row(r) = table.row(tokens[r]);
  tr.q.noalias() = tr.x * pl.map(params, s.wq);
  tr.k.noalias() = tr.x * pl.map(params, s.wk);
  tr.v.noalias() = tr.x * pl.map(params, s.wv);
  tr.p.noalias() = tr.q * tr.k.transpose();
  tr.p *= 1.0 / std::sqrt(static_cast<double>(d));
  ops::softmax_rows(tr.p);
  tr.a.noalias() = tr.p * tr.v;
  tr.h = tr.x;
  tr.h.noalias() += tr.a * pl.map(params, s.wo);
  tr.pooled = tr.h.colwise().mean();
  return tr.pooled * wp + bp;
}

void encode_sequence_backward(const SequenceTrace& trace, const RowVector& d_out, const ModelLayout& model,
                              std::span<const double> params, int field, std::span<double> dense_grad,
                              std::vector<RowGrad>& rows) {
  const SequenceEncoderSlots& s = model.sequence_encoders.at(model.encoder[field]);
  const ParamLayout& pl = model.params;
  const ConstMatrixMap wp = pl.map(params, s.wp);
  pl.map(dense_grad, s.wp).noalias() += trace.pooled.transpose() * d_out;
  pl.map(dense_grad, s.bp) += d_out;
  const RowVector d_pooled = d_out * wp.transpose();
  const int table = model.table[field];
  if (trace.padded) {
    rows.push_back(RowGrad{table, trace.rows[0], d_pooled});
    return;
  }
  const Eigen::Index len = trace.x.rows();
  const double scale = 1.0 / std::sqrt(static_cast<double>(trace.x.cols()));
  // Mean pooling spreads the gradient evenly over positions.
  const Matrix dh = Matrix::Ones(len, 1) * (d_pooled / static_cast<double>(len));
  Matrix dx = dh;
  pl.map(dense_grad, s.wo).noalias() += trace.a.transpose() * dh;
  const Matrix da = dh * pl.map(params, s.wo).transpose();
  const Matrix dp = da * trace.v.transpose();
  const Matrix dv = trace.p.transpose() * da;
  Matrix ds = ops::softmax_rows_backward(trace.p, dp);
  ds *= scale;
  const Matrix dq = ds * trace.k;
  const Matrix dk = ds.transpose() * trace.q;
  pl.map(dense_grad, s.wq).noalias() += trace.x.transpose() * dq;
  pl.map(dense_grad, s.wk).noalias() += trace.x.transpose() * dk;
  pl.map(dense_grad, s.wv).noalias() += trace.x.transpose() * dv;
  dx.noalias() += dq * pl.map(params, s.wq).transpose();
  dx.noalias() += dk * pl.map(params, s.wk).transpose();
  dx.noalias() += dv * pl.map(params, s.wv).transpose();
  for (Eigen::Index r = 0; r < len; ++r) rows.push_back(RowGrad{table, trace.rows[r], dx.row(r)});
}

RowVector embed_field(const DatasetSchema& schema, std::span<const CdfBinner> binners, const ModelLayout& model,
                      std::span<const double> params, const RawSample& raw, int field) {
  const FieldSpec& f = schema.fields.at(field);
  const ConstMatrixMap table = model.params.map(params, model.table[field]);
  switch (f.kind) {
    case FieldKind::kId:
    case FieldKind::kCategorical: {
      const std::int32_t tok = std::get<std::int32_t>(raw.features[field]);
      if (tok < 0 || tok >= f.cardinality) throw std::out_of_range("token out of vocabulary in " + f.name);
      return table.row(tok);
    }
    case FieldKind::kNumerical:
      return table.row(binners[field].bin(std::get<double>(raw.features[field])));
    case FieldKind::kSequence: {
      const auto& seq = std::get<std::vector<std::int32_t>>(raw.features[field]);
      for (std::int32_t tok : seq) {
        if (tok < 0 || tok >= f.cardinality) throw std::out_of_range("item out of vocabulary in " + f.name);
      }
      return encode_sequence(seq, model, params, field);
    }
    case FieldKind::kLabel:
      if (raw.label != 0 && raw.label != 1) throw std::out_of_range("label must be 0 or 1");
      return table.row(raw.label);
  }
  throw std::logic_error("unreachable");
}

}  // namespace hgen
