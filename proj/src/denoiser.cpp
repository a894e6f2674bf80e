// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

#include "hgen/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nn_ops.hpp"

namespace hgen {

std::vector<double> query_scales(std::span<const double> s, int num_positions) {
  if (static_cast<int>(s.size()) + 1 != num_positions) {
    throw std::invalid_argument("query_scales: need one log-difficulty per feature field");
  }
  std::vector<double> scales(num_positions, 1.0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!std::isfinite(s[i])) throw std::invalid_argument("query_scales: non-finite log-difficulty");
    scales[i] = std::exp(-0.5 * s[i]);
  }
  return scales;
}

Matrix difficulty_scaled_attention(const Matrix& hidden, std::span<const double> scales, const ModelLayout& model,
                                   std::span<const double> params, int layer, AttentionTrace* trace) {
  const LayerSlots& ls = model.layers.at(layer);
  const ParamLayout& pl = model.params;
  AttentionTrace local;
  AttentionTrace& tr = trace != nullptr ? *trace : local;
  tr.input = hidden;
  ops::layer_norm(hidden, pl.map(params, ls.ln1_gain), pl.map(params, ls.ln1_bias), tr.normed, tr.xhat, tr.rstd);
  tr.q.noalias() = tr.normed * pl.map(params, ls.wq);
  tr.k.noalias() = tr.normed * pl.map(params, ls.wk);
  tr.v.noalias() = tr.normed * pl.map(params, ls.wv);
  tr.q_scaled = tr.q;
  if (!scales.empty()) {
    for (Eigen::Index r = 0; r < tr.q.rows(); ++r) tr.q_scaled.row(r) *= scales[r];
  }
  tr.probs.noalias() = tr.q_scaled * tr.k.transpose();
  tr.probs *= 1.0 / std::sqrt(static_cast<double>(hidden.cols()));
  ops::softmax_rows(tr.probs);
  tr.mixed.noalias() = tr.probs * tr.v;
  Matrix out = hidden;
  out.noalias() += tr.mixed * pl.map(params, ls.wo);
  return out;
}

Matrix denoise_forward(const Matrix& inputs, int t, const ModelLayout& model, std::span<const double> params,
                       QueryScaling scaling, ForwardTrace* trace, std::uint64_t params_version) {
  const ParamLayout& pl = model.params;
  if (inputs.rows() != model.num_positions || inputs.cols() != model.config.dim) {
    throw std::invalid_argument("denoise_forward: input shape does not match the schema");
  }
  if (t < 0 || t > model.config.timesteps) throw std::out_of_range("denoise_forward: timestep outside [0, T]");
  ForwardTrace local;
  ForwardTrace& tr = trace != nullptr ? *trace : local;
  tr.t = t;
  tr.params_version = params_version;
  tr.scaled = scaling == QueryScaling::kDifficulty;
  if (tr.scaled) {
    const ConstMatrixMap s = pl.map(params, model.difficulty);
    tr.scales = query_scales(std::span<const double>(s.data(), s.size()), model.num_positions);
  } else {
    tr.scales.clear();
  }

  tr.input = inputs + pl.map(params, model.position);
  tr.input.rowwise() += pl.map(params, model.timestep).row(t);
  tr.layers.resize(model.layers.size());
  Matrix x = tr.input;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const LayerSlots& ls = model.layers[l];
    LayerTrace& lt = tr.layers[l];
    lt.after_attn = difficulty_scaled_attention(x, tr.scales, model, params, static_cast<int>(l), &lt.attn);
    ops::layer_norm(lt.after_attn, pl.map(params, ls.ln2_gain), pl.map(params, ls.ln2_bias), lt.normed, lt.xhat,
                    lt.rstd);
    lt.pre_act.noalias() = lt.normed * pl.map(params, ls.w1);
    lt.pre_act.rowwise() += pl.map(params, ls.b1).row(0);
    lt.act = lt.pre_act.unaryExpr(&ops::silu);
    x = lt.after_attn;
    x.noalias() += lt.act * pl.map(params, ls.w2);
    x.rowwise() += pl.map(params, ls.b2).row(0);
  }
  tr.last = x;
  ops::layer_norm(tr.last, pl.map(params, model.final_gain), pl.map(params, model.final_bias), tr.normed, tr.xhat,
                  tr.rstd);
  tr.output.noalias() = tr.normed * pl.map(params, model.head_w);
  tr.output.rowwise() += pl.map(params, model.head_b).row(0);
  return tr.output;
}

Matrix field_inputs(const TokenizedSample& x, const ModelLayout& model, std::span<const double> params,
                    std::vector<SequenceTrace>* seq_traces) {
  const int p = model.num_positions;
  if (x.num_fields() != p) throw std::invalid_argument("field_inputs: sample does not match the schema");
  Matrix in(p, model.config.dim);
  if (seq_traces != nullptr) seq_traces->resize(p);
  for (int i = 0; i < p; ++i) {
    const ConstMatrixMap table = model.params.map(params, model.table[i]);
    if (x.masked[i]) {
      in.row(i) = table.row(model.mask_row[i]);
    } else if (model.encoder[i] >= 0) {
      in.row(i) = encode_sequence(x.sequences[i], model, params, i,
                                  seq_traces != nullptr ? &(*seq_traces)[i] : nullptr);
    } else {
      const int tok = x.tokens[i];
      if (tok < 0 || tok >= model.mask_row[i]) throw std::out_of_range("field_inputs: token out of vocabulary");
      in.row(i) = table.row(tok);
    }
  }
  return in;
}

Matrix denoise_sample(const TokenizedSample& x, const ModelLayout& model, std::span<const double> params,
                      QueryScaling scaling, ForwardTrace* trace) {
  return denoise_forward(field_inputs(x, model, params), x.t, model, params, scaling, trace);
}

void denoise_backward(const ForwardTrace& trace, const Matrix& d_output, const ModelLayout& model,
                      std::span<const double> params, std::uint64_t params_version, std::span<double> dense_grad,
                      Matrix& d_inputs) {
  if (trace.params_version != params_version) {
    throw std::logic_error("denoise_backward: trace was recorded against different parameters");
  }
  const ParamLayout& pl = model.params;
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(model.config.dim));

  pl.map(dense_grad, model.head_w).noalias() += trace.normed.transpose() * d_output;
  ops::add_column_sums(d_output, pl.map(dense_grad, model.head_b));
  const Matrix d_normed = d_output * pl.map(params, model.head_w).transpose();
  Matrix dx;
  ops::layer_norm_backward(d_normed, trace.xhat, trace.rstd, pl.map(params, model.final_gain), dx,
                           pl.map(dense_grad, model.final_gain), pl.map(dense_grad, model.final_bias));

  MatrixMap ds = pl.map(dense_grad, model.difficulty);
  for (int l = static_cast<int>(model.layers.size()) - 1; l >= 0; --l) {
    const LayerSlots& ls = model.layers[l];
    const LayerTrace& lt = trace.layers[l];
    const AttentionTrace& at = lt.attn;

    // MLP sub-block.
    pl.map(dense_grad, ls.w2).noalias() += lt.act.transpose() * dx;
    ops::add_column_sums(dx, pl.map(dense_grad, ls.b2));
    Matrix d_act = dx * pl.map(params, ls.w2).transpose();
    for (Eigen::Index r = 0; r < d_act.rows(); ++r) {
      for (Eigen::Index c = 0; c < d_act.cols(); ++c) d_act(r, c) *= ops::silu_grad(lt.pre_act(r, c));
    }
    pl.map(dense_grad, ls.w1).noalias() += lt.normed.transpose() * d_act;
    ops::add_column_sums(d_act, pl.map(dense_grad, ls.b1));
    const Matrix d_m = d_act * pl.map(params, ls.w1).transpose();
    Matrix d_ln2;
    ops::layer_norm_backward(d_m, lt.xhat, lt.rstd, pl.map(params, ls.ln2_gain), d_ln2,
                             pl.map(dense_grad, ls.ln2_gain), pl.map(dense_grad, ls.ln2_bias));
    const Matrix d_x1 = dx + d_ln2;

    // Attention sub-block.
    pl.map(dense_grad, ls.wo).noalias() += at.mixed.transpose() * d_x1;
    const Matrix d_mixed = d_x1 * pl.map(params, ls.wo).transpose();
    const Matrix d_probs = d_mixed * at.v.transpose();
    const Matrix d_v = at.probs.transpose() * d_mixed;
    Matrix d_logits = ops::softmax_rows_backward(at.probs, d_probs);
    d_logits *= att_scale;
    const Matrix d_qs = d_logits * at.k;
    const Matrix d_k = d_logits.transpose() * at.q_scaled;
    Matrix d_q = d_qs;
    if (trace.scaled) {
      for (Eigen::Index r = 0; r < d_q.rows(); ++r) {
        d_q.row(r) *= trace.scales[r];
        if (r < model.num_features) {
          // c_r = exp(-s_r / 2)  =>  dc_r / ds_r = -c_r / 2.
          ds(0, r) += -0.5 * trace.scales[r] * d_qs.row(r).dot(at.q.row(r));
        }
      }
    }
    pl.map(dense_grad, ls.wq).noalias() += at.normed.transpose() * d_q;
    pl.map(dense_grad, ls.wk).noalias() += at.normed.transpose() * d_k;
    pl.map(dense_grad, ls.wv).noalias() += at.normed.transpose() * d_v;
    Matrix d_a = d_q * pl.map(params, ls.wq).transpose();
    d_a.noalias() += d_k * pl.map(params, ls.wk).transpose();
    d_a.noalias() += d_v * pl.map(params, ls.wv).transpose();
    Matrix d_ln1;
    ops::layer_norm_backward(d_a, at.xhat, at.rstd, pl.map(params, ls.ln1_gain), d_ln1,
                             pl.map(dense_grad, ls.ln1_gain), pl.map(dense_grad, ls.ln1_bias));
    dx = d_x1 + d_ln1;
  }
  pl.map(dense_grad, model.position) += dx;
  ops::add_column_sums(dx, pl.map(dense_grad, model.timestep).row(trace.t));
  d_inputs = dx;
}

double cosine(const RowVector& a, const RowVector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw std::domain_error("cosine: zero-norm vector");
  return a.dot(b) / (na * nb);
}

double batch_softmax_logprob(const RowVector& context, const RowVector& positive,
                             std::span<const RowVector> negatives, double scale) {
  if (negatives.empty()) throw std::invalid_argument("batch_softmax_logprob: need at least one negative");
  const double pos = scale * cosine(positive, context);
  std::vector<double> logits;
  logits.reserve(negatives.size() + 1);
  logits.push_back(pos);
  for (const RowVector& n : negatives) logits.push_back(scale * cosine(n, context));
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - mx);
  return pos - mx - std::log(sum);
}

}  // namespace hgen
