// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hgen {

enum class OptimizerKind { kSgd, kAdam };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(const std::string& name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kSgd;
  double lr = 0.1;
  double momentum = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double l2 = 0.0;
};

struct OptimizerState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t steps = 0;

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

// Half-open index range of the flat parameter vector.
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool contains(std::size_t i) const { return i >= begin && i < end; }
};

OptimizerState make_optimizer_state(const OptimizerConfig& config, std::size_t size);

// One update of `params` from `grad`. Entries in `frozen` are left untouched;
// entries in `no_decay` skip the L2 term. Throws std::invalid_argument for a
// non-positive learning rate or mismatched sizes.
void optimizer_step(const OptimizerConfig& config, OptimizerState& state, std::span<double> params,
                    std::span<const double> grad, IndexRange frozen = {}, IndexRange no_decay = {});

}  // namespace hgen
