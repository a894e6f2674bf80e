// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

// Flat parameter storage. Every trainable tensor is a row-major float64 slice
// of one contiguous vector. Dense tensors (projections, norms, position and
// timestep embeddings, sequence encoders, log-difficulties) come first so a
// gradient buffer covering [0, dense_size()) can be reduced per chunk; field
// embedding tables follow and receive row-sparse gradients.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hgen/schema.hpp"

namespace hgen {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

// Gradient for one row of an embedding table.
struct RowGrad {
  int slot = -1;
  int row = -1;
  RowVector grad;
};

struct TensorSlot {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;
  bool sparse = false;

  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

class ParamLayout {
 public:
  // Dense tensors must all be added before the first sparse one.
  int add(std::string name, int rows, int cols, bool sparse = false);

  const TensorSlot& slot(int id) const { return slots_[id]; }
  const std::vector<TensorSlot>& slots() const { return slots_; }
  std::size_t size() const { return size_; }
  std::size_t dense_size() const { return dense_size_; }
  int find(std::string_view name) const;

  MatrixMap map(std::span<double> flat, int id) const {
    const TensorSlot& s = slots_[id];
    return MatrixMap(flat.data() + s.offset, s.rows, s.cols);
  }
  ConstMatrixMap map(std::span<const double> flat, int id) const {
    const TensorSlot& s = slots_[id];
    return ConstMatrixMap(flat.data() + s.offset, s.rows, s.cols);
  }

 private:
  std::vector<TensorSlot> slots_;
  std::size_t size_ = 0;
  std::size_t dense_size_ = 0;
  bool sparse_started_ = false;
};

struct ModelConfig {
  int dim = 16;
  int layers = 2;
  int mlp_multiplier = 4;
  int timesteps = 100;
};

struct LayerSlots {
  int ln1_gain, ln1_bias, wq, wk, wv, wo, ln2_gain, ln2_bias, w1, b1, w2, b2;
};

struct SequenceEncoderSlots {
  int wq, wk, wv, wo, wp, bp;
};

// Slot ids of every tensor of the model, derived from a schema.
struct ModelLayout {
  ParamLayout params;
  ModelConfig config;
  int num_positions = 0;  // N feature fields + label
  int num_features = 0;
  int position = -1;
  int timestep = -1;
  std::vector<LayerSlots> layers;
  int final_gain = -1;
  int final_bias = -1;
  int head_w = -1;
  int head_b = -1;
  int difficulty = -1;  // 1 x N log-difficulties
  // Per field: embedding table slot; for sequences the item table.
  std::vector<int> table;
  // Per field: row holding the absorbing mask embedding.
  std::vector<int> mask_row;
  // Per field: padding row (sequences only, else -1).
  std::vector<int> pad_row;
  // Per field: index into sequence_encoders (sequences only, else -1).
  std::vector<int> encoder;
  std::vector<SequenceEncoderSlots> sequence_encoders;
};

ModelLayout build_model_layout(const DatasetSchema& schema, const ModelConfig& config);

// Uniform(-1/sqrt(d), 1/sqrt(d)) for weights and tables, unit norm gains,
// zero biases and zero log-difficulties.
std::vector<double> init_params(const ModelLayout& model, std::uint64_t seed);

}  // namespace hgen
