// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

#include "hgen/params.hpp"

namespace hgen::ops {

inline constexpr double kLayerNormEps = 1e-5;

// Row-wise layer normalisation. Stores the normalised input and the inverse
// standard deviation for the backward pass.
template <typename Gain, typename Bias>
void layer_norm(const Matrix& x, const Gain& gain, const Bias& bias, Matrix& y, Matrix& xhat,
                Eigen::VectorXd& rstd) {
  const Eigen::Index rows = x.rows();
  const double inv_d = 1.0 / static_cast<double>(x.cols());
  xhat.resize(rows, x.cols());
  y.resize(rows, x.cols());
  rstd.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double mean = x.row(r).sum() * inv_d;
    const double var = (x.row(r).array() - mean).square().sum() * inv_d;
    rstd(r) = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(r) = (x.row(r).array() - mean) * rstd(r);
    y.row(r) = xhat.row(r).cwiseProduct(gain) + bias;
  }
}

template <typename Gain, typename DGain, typename DBias>
void layer_norm_backward(const Matrix& dy, const Matrix& xhat, const Eigen::VectorXd& rstd, const Gain& gain,
                         Matrix& dx, DGain&& dgain, DBias&& dbias) {
  const Eigen::Index rows = dy.rows();
  const double d = static_cast<double>(dy.cols());
  dx.resize(rows, dy.cols());
  for (Eigen::Index r = 0; r < rows; ++r) {
    dgain += dy.row(r).cwiseProduct(xhat.row(r));
    dbias += dy.row(r);
    const RowVector dxhat = dy.row(r).cwiseProduct(gain);
    const double sum = dxhat.sum();
    const double dot = dxhat.dot(xhat.row(r));
    dx.row(r) = (rstd(r) / d) * (d * dxhat.array() - sum - xhat.row(r).array() * dot).matrix();
  }
}

// dst += column sums of m, one row at a time. Eigen's vectorised partial
// reduction peels by the destination's runtime alignment, which would tie the
// rounding to wherever the gradient buffer happened to be allocated.
template <typename Dst>
void add_column_sums(const Matrix& m, Dst&& dst) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) dst += m.row(r);
}

inline void softmax_rows(Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double mx = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - mx).exp();
    m.row(r) /= m.row(r).sum();
  }
}

// Gradient through a row softmax given its output p.
inline Matrix softmax_rows_backward(const Matrix& p, const Matrix& dp) {
  Matrix ds(p.rows(), p.cols());
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const double dot = dp.row(r).dot(p.row(r));
    ds.row(r) = p.row(r).cwiseProduct((dp.row(r).array() - dot).matrix());
  }
  return ds;
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double silu(double x) { return x * sigmoid(x); }

inline double silu_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

}  // namespace hgen::ops
