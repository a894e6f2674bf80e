// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

#include "hgen/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace hgen {

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::kSgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer_kind(const std::string& name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  throw std::invalid_argument("unknown optimizer: " + name);
}

OptimizerState make_optimizer_state(const OptimizerConfig& config, std::size_t size) {
  OptimizerState state;
  if (config.kind == OptimizerKind::kAdam) {
    state.m.assign(size, 0.0);
    state.v.assign(size, 0.0);
  } else if (config.momentum != 0.0) {
    state.m.assign(size, 0.0);
  }
  return state;
}

void optimizer_step(const OptimizerConfig& config, OptimizerState& state, std::span<double> params,
                    std::span<const double> grad, IndexRange frozen, IndexRange no_decay) {
  if (!(config.lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (params.size() != grad.size()) throw std::invalid_argument("optimizer_step: size mismatch");
  const bool adam = config.kind == OptimizerKind::kAdam;
  const bool momentum = !adam && config.momentum != 0.0;
  if ((adam || momentum) && state.m.size() != params.size()) {
    throw std::invalid_argument("optimizer_step: state does not match the parameters");
  }
  ++state.steps;
  const double lr = config.lr;
  const double l2 = config.l2;
  if (!adam) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (frozen.contains(i)) continue;
      double g = grad[i];
      if (l2 != 0.0 && !no_decay.contains(i)) g += l2 * params[i];
      if (momentum) {
        state.m[i] = config.momentum * state.m[i] + g;
        g = state.m[i];
      }
      params[i] -= lr * g;
    }
    return;
  }
  const double b1 = config.beta1;
  const double b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.steps));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.steps));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (frozen.contains(i)) continue;
    double g = grad[i];
    if (l2 != 0.0 && !no_decay.contains(i)) g += l2 * params[i];
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
    params[i] -= lr * (state.m[i] / c1) / (std::sqrt(state.v[i] / c2) + config.eps);
  }
}

}  // namespace hgen
