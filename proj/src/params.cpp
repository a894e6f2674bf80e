// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

#include "hgen/params.hpp"

#include <cmath>
#include <stdexcept>

#include "hgen/rng.hpp"

namespace hgen {

int ParamLayout::add(std::string name, int rows, int cols, bool sparse) {
  if (rows <= 0 || cols <= 0) throw std::invalid_argument("tensor " + name + " has an empty shape");
  if (!sparse && sparse_started_) throw std::logic_error("dense tensor " + name + " added after sparse ones");
  if (sparse && !sparse_started_) {
    sparse_started_ = true;
    dense_size_ = size_;
  }
  TensorSlot s{std::move(name), rows, cols, size_, sparse};
  size_ += s.size();
  if (!sparse_started_) dense_size_ = size_;
  slots_.push_back(std::move(s));
  return static_cast<int>(slots_.size()) - 1;
}

int ParamLayout::find(std::string_view name) const {
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (slots_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

ModelLayout build_model_layout(const DatasetSchema& schema, const ModelConfig& config) {
  schema.validate();
  if (config.dim < 1 || config.layers < 1 || config.timesteps < 1 || config.mlp_multiplier < 1) {
    throw std::invalid_argument("invalid model config");
  }
  ModelLayout m;
  m.config = config;
  m.num_positions = schema.num_fields();
  m.num_features = schema.num_features();
  const int d = config.dim;
  const int hidden = config.mlp_multiplier * d;
  ParamLayout& p = m.params;

  m.position = p.add("denoiser.position", m.num_positions, d);
  m.timestep = p.add("denoiser.timestep", config.timesteps + 1, d);
  for (int l = 0; l < config.layers; ++l) {
    const std::string pre = "denoiser.layer" + std::to_string(l) + ".";
    LayerSlots s{};
    s.ln1_gain = p.add(pre + "ln1.gain", 1, d);
    s.ln1_bias = p.add(pre + "ln1.bias", 1, d);
    s.wq = p.add(pre + "wq", d, d);
    s.wk = p.add(pre + "wk", d, d);
    s.wv = p.add(pre + "wv", d, d);
    s.wo = p.add(pre + "wo", d, d);
    s.ln2_gain = p.add(pre + "ln2.gain", 1, d);
    s.ln2_bias = p.add(pre + "ln2.bias", 1, d);
    s.w1 = p.add(pre + "mlp.w1", d, hidden);
    s.b1 = p.add(pre + "mlp.b1", 1, hidden);
    s.w2 = p.add(pre + "mlp.w2", hidden, d);
    s.b2 = p.add(pre + "mlp.b2", 1, d);
    m.layers.push_back(s);
  }
  m.final_gain = p.add("denoiser.final.gain", 1, d);
  m.final_bias = p.add("denoiser.final.bias", 1, d);
  m.head_w = p.add("denoiser.head.w", d, d);
  m.head_b = p.add("denoiser.head.b", 1, d);

  m.encoder.assign(m.num_positions, -1);
  for (int i = 0; i < m.num_features; ++i) {
    if (schema.fields[i].kind != FieldKind::kSequence) continue;
    const std::string pre = "encoder." + schema.fields[i].name + ".";
    SequenceEncoderSlots s{};
    s.wq = p.add(pre + "wq", d, d);
    s.wk = p.add(pre + "wk", d, d);
    s.wv = p.add(pre + "wv", d, d);
    s.wo = p.add(pre + "wo", d, d);
    s.wp = p.add(pre + "wp", d, d);
    s.bp = p.add(pre + "bp", 1, d);
    m.encoder[i] = static_cast<int>(m.sequence_encoders.size());
    m.sequence_encoders.push_back(s);
  }
  m.difficulty = p.add("difficulty.s", 1, m.num_features);

  m.table.assign(m.num_positions, -1);
  m.mask_row.assign(m.num_positions, -1);
  m.pad_row.assign(m.num_positions, -1);
  for (int i = 0; i < m.num_positions; ++i) {
    const FieldSpec& f = schema.fields[i];
    const int v = f.cardinality;
    if (f.kind == FieldKind::kSequence) {
      m.table[i] = p.add("table." + f.name, v + 2, d, true);
      m.pad_row[i] = v;
      m.mask_row[i] = v + 1;
    } else {
      m.table[i] = p.add("table." + f.name, v + 1, d, true);
      m.mask_row[i] = v;
    }
  }
  return m;
}

std::vector<double> init_params(const ModelLayout& model, std::uint64_t seed) {
  std::vector<double> params(model.params.size(), 0.0);
  const double bound = 1.0 / std::sqrt(static_cast<double>(model.config.dim));
  const auto& slots = model.params.slots();
  for (std::size_t id = 0; id < slots.size(); ++id) {
    const TensorSlot& s = slots[id];
    const bool is_gain = s.name.ends_with(".gain");
    const bool is_bias = s.name.ends_with(".bias") || s.name.ends_with(".b1") || s.name.ends_with(".b2") ||
                         s.name.ends_with(".bp") || s.name.ends_with("head.b");
    double* dst = params.data() + s.offset;
    if (is_gain) {
      std::fill(dst, dst + s.size(), 1.0);
    } else if (is_bias || static_cast<int>(id) == model.difficulty) {
      std::fill(dst, dst + s.size(), 0.0);
    } else {
      Rng rng = make_stream(seed, Stream::kInit, id);
      for (std::size_t k = 0; k < s.size(); ++k) dst[k] = bound * (2.0 * uniform01(rng) - 1.0);
    }
  }
  return params;
}

}  // namespace hgen
