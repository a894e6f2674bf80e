// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

// Denoising network. Each of the N+1 field positions enters as
//   (field embedding or mask embedding) + position embedding + timestep embedding
// and passes through L pre-norm blocks
//   X1 = X + softmax(diag(c) Q K^T / sqrt(d)) V Wo,  Q,K,V from LN1(X)
//   X2 = X1 + SiLU(LN2(X1) W1 + b1) W2 + b2
// where c_i = exp(-s_i / 2) for feature positions and 1 for the label. The
// head maps LN(X_L) row-wise to the context vectors that score candidates.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hgen/diffusion.hpp"
#include "hgen/encode.hpp"
#include "hgen/params.hpp"

namespace hgen {

enum class QueryScaling {
  kOff,         // plain attention; s does not enter the forward pass
  kDifficulty,  // query of feature field i scaled by exp(-s_i / 2)
};

// Per-position query scale; the label position is fixed at 1. Throws
// std::invalid_argument for non-finite s.
std::vector<double> query_scales(std::span<const double> s, int num_positions);

struct AttentionTrace {
  Matrix input;  // block input (residual stream)
  Matrix normed, xhat;
  Eigen::VectorXd rstd;
  Matrix q, k, v;
  Matrix q_scaled;  // equals q when scaling is off
  Matrix probs;     // row-stochastic attention weights
  Matrix mixed;     // probs * v
};

struct LayerTrace {
  AttentionTrace attn;
  Matrix after_attn;
  Matrix normed, xhat;
  Eigen::VectorXd rstd;
  Matrix pre_act, act;
};

struct ForwardTrace {
  Matrix input;  // X0, after position and timestep embeddings
  int t = 0;
  bool scaled = false;
  std::vector<double> scales;
  std::vector<LayerTrace> layers;
  Matrix last, normed, xhat;
  Eigen::VectorXd rstd;
  Matrix output;
  std::uint64_t params_version = 0;
};

// One pre-norm attention block with difficulty-scaled queries, including the
// output projection and the residual connection. `scales` empty means the
// unmodulated block.
Matrix difficulty_scaled_attention(const Matrix& hidden, std::span<const double> scales, const ModelLayout& model,
                                   std::span<const double> params, int layer, AttentionTrace* trace = nullptr);

// Core forward over prepared input embeddings (P x d, mask rows already
// substituted). Returns the P x d context vectors G(.).
Matrix denoise_forward(const Matrix& inputs, int t, const ModelLayout& model, std::span<const double> params,
                       QueryScaling scaling, ForwardTrace* trace = nullptr, std::uint64_t params_version = 0);

// Input embeddings of a (possibly masked) tokenized sample: masked fields use
// their mask row, sequences are encoded. Optionally returns the sequence
// encoder traces (indexed by field).
Matrix field_inputs(const TokenizedSample& x, const ModelLayout& model, std::span<const double> params,
                    std::vector<SequenceTrace>* seq_traces = nullptr);

// Convenience: field_inputs followed by denoise_forward at x.t.
Matrix denoise_sample(const TokenizedSample& x, const ModelLayout& model, std::span<const double> params,
                      QueryScaling scaling, ForwardTrace* trace = nullptr);

// Reverse pass. Adds parameter gradients (including the attention-path
// gradient of s when scaling was on) to `dense_grad`, and writes the gradient
// with respect to the input embeddings to `d_inputs`. Throws std::logic_error
// if `params_version` differs from the version recorded in the trace.
void denoise_backward(const ForwardTrace& trace, const Matrix& d_output, const ModelLayout& model,
                      std::span<const double> params, std::uint64_t params_version, std::span<double> dense_grad,
                      Matrix& d_inputs);

// Cosine similarity; throws std::domain_error for a zero-norm argument.
double cosine(const RowVector& a, const RowVector& b);

// log softmax probability of the positive among {positive} U negatives, with
// logits scale * cos(candidate, context).
double batch_softmax_logprob(const RowVector& context, const RowVector& positive,
                             std::span<const RowVector> negatives, double scale = 1.0);

}  // namespace hgen
