// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

// Straight-line scalar reimplementation of the sequence encoder and the
// denoiser forward pass. Plain loops over nested vectors, no Eigen, so it
// shares no code with the library kernels.

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "hgen/params.hpp"

namespace hgen::reference {

using Mat = std::vector<std::vector<double>>;

inline Mat slot(const ModelLayout& m, std::span<const double> p, int id) {
  const TensorSlot& s = m.params.slot(id);
  Mat out(s.rows, std::vector<double>(s.cols));
  for (int r = 0; r < s.rows; ++r) {
    for (int c = 0; c < s.cols; ++c) out[r][c] = p[s.offset + static_cast<std::size_t>(r) * s.cols + c];
  }
  return out;
}

inline Mat matmul(const Mat& a, const Mat& b) {
  const std::size_t n = a.size(), k = b.size(), m = b[0].size();
  Mat out(n, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t l = 0; l < k; ++l) acc += a[i][l] * b[l][j];
      out[i][j] = acc;
    }
  }
  return out;
}

inline Mat add(Mat a, const Mat& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a[i].size(); ++j) a[i][j] += b[i][j];
  }
  return a;
}

inline Mat add_row(Mat a, const std::vector<double>& row) {
  for (auto& r : a) {
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += row[j];
  }
  return a;
}

// softmax(scale_i * Q K^T / sqrt(d)) V
inline Mat attention(const Mat& q, const Mat& k, const Mat& v, const std::vector<double>& scale) {
  const std::size_t n = q.size(), d = q[0].size();
  Mat out(n, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> logit(n);
    double mx = -INFINITY;
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += scale[i] * q[i][c] * k[j][c];
      logit[j] = dot / std::sqrt(static_cast<double>(d));
      mx = std::max(mx, logit[j]);
    }
    double z = 0.0;
    for (double& x : logit) {
      x = std::exp(x - mx);
      z += x;
    }
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t c = 0; c < d; ++c) out[i][c] += logit[j] / z * v[j][c];
    }
  }
  return out;
}

inline Mat layer_norm(const Mat& x, const Mat& gain, const Mat& bias) {
  Mat out = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i].size());
    double mean = 0.0;
    for (double v : x[i]) mean += v;
    mean /= d;
    double var = 0.0;
    for (double v : x[i]) var += (v - mean) * (v - mean);
    var /= d;
    const double inv = 1.0 / std::sqrt(var + 1e-5);
    for (std::size_t j = 0; j < x[i].size(); ++j) out[i][j] = (x[i][j] - mean) * inv * gain[0][j] + bias[0][j];
  }
  return out;
}

inline std::vector<double> sequence(std::span<const std::int32_t> tokens, const ModelLayout& m,
                                    std::span<const double> p, int field) {
  const SequenceEncoderSlots& s = m.sequence_encoders[m.encoder[field]];
  const Mat table = slot(m, p, m.table[field]);
  Mat x;
  if (tokens.empty()) {
    x.push_back(table[m.pad_row[field]]);
  } else {
    for (auto t : tokens) x.push_back(table[t]);
    const std::vector<double> ones(x.size(), 1.0);
    const Mat a = attention(matmul(x, slot(m, p, s.wq)), matmul(x, slot(m, p, s.wk)), matmul(x, slot(m, p, s.wv)),
                            ones);
    x = add(x, matmul(a, slot(m, p, s.wo)));
  }
  Mat pooled(1, std::vector<double>(x[0].size(), 0.0));
  for (const auto& r : x) {
    for (std::size_t j = 0; j < r.size(); ++j) pooled[0][j] += r[j] / static_cast<double>(x.size());
  }
  return add_row(matmul(pooled, slot(m, p, s.wp)), slot(m, p, s.bp)[0])[0];
}

// Context vectors for prepared input embeddings at timestep t. `scales` holds
// one query factor per position (all ones for plain attention).
inline Mat denoise(const Mat& inputs, int t, const ModelLayout& m, std::span<const double> p,
                   const std::vector<double>& scales) {
  Mat x = add(inputs, slot(m, p, m.position));
  x = add_row(x, slot(m, p, m.timestep)[t]);
  for (const LayerSlots& ls : m.layers) {
    const Mat a = layer_norm(x, slot(m, p, ls.ln1_gain), slot(m, p, ls.ln1_bias));
    const Mat mixed = attention(matmul(a, slot(m, p, ls.wq)), matmul(a, slot(m, p, ls.wk)),
                                matmul(a, slot(m, p, ls.wv)), scales);
    x = add(x, matmul(mixed, slot(m, p, ls.wo)));
    Mat h = add_row(matmul(layer_norm(x, slot(m, p, ls.ln2_gain), slot(m, p, ls.ln2_bias)), slot(m, p, ls.w1)),
                    slot(m, p, ls.b1)[0]);
    for (auto& r : h) {
      for (double& v : r) v = v / (1.0 + std::exp(-v));
    }
    x = add_row(add(x, matmul(h, slot(m, p, ls.w2))), slot(m, p, ls.b2)[0]);
  }
  const Mat n = layer_norm(x, slot(m, p, m.final_gain), slot(m, p, m.final_bias));
  return add_row(matmul(n, slot(m, p, m.head_w)), slot(m, p, m.head_b)[0]);
}

}  // namespace hgen::reference
