// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

#include "hgen/balance.hpp"

#include <cmath>
#include <stdexcept>

namespace hgen {

int FieldLosses::num_present() const {
  int n = 0;
  for (const auto& l : feature) n += l.has_value();
  return n;
}

double DifficultyParams::sigma(int i) const { return std::exp(0.5 * s.at(i)); }

std::optional<double> mean_nll(std::span<const double> log_probs) {
  if (log_probs.empty()) return std::nullopt;
  double sum = 0.0;
  for (double lp : log_probs) sum -= lp;
  return sum / static_cast<double>(log_probs.size());
}

double self_balancing_loss(const FieldLosses& losses, std::span<const double> s) {
  if (s.size() != losses.feature.size()) throw std::invalid_argument("self_balancing_loss: size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!losses.feature[i]) continue;
    total += std::exp(-s[i]) * *losses.feature[i] + 0.5 * s[i];
  }
  if (losses.label) total += *losses.label;
  return total;
}

double uniform_loss(const FieldLosses& losses) {
  double total = 0.0;
  for (const auto& l : losses.feature) {
    if (l) total += *l;
  }
  if (losses.label) total += *losses.label;
  return total;
}

double grad_s(double loss, double s) { return 0.5 - std::exp(-s) * loss; }

std::vector<double> grad_s(const FieldLosses& losses, std::span<const double> s) {
  if (s.size() != losses.feature.size()) throw std::invalid_argument("grad_s: size mismatch");
  std::vector<double> g(s.size(), 0.0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (losses.feature[i]) g[i] = grad_s(*losses.feature[i], s[i]);
  }
  return g;
}

double second_derivative_s(double loss, double s) { return std::exp(-s) * loss; }

double equilibrium_s(double loss) {
  if (!(loss > 0.0)) throw std::invalid_argument("equilibrium_s: loss must be positive");
  return std::log(2.0 * loss);
}

std::vector<double> converge_s(double loss, double s0, double eta, int steps) {
  std::vector<double> traj;
  traj.reserve(static_cast<std::size_t>(steps) + 1);
  double s = s0;
  traj.push_back(s);
  for (int k = 0; k < steps; ++k) {
    s -= eta * grad_s(loss, s);
    traj.push_back(s);
  }
  return traj;
}

std::vector<std::optional<double>> normalized_difficulty(std::span<const std::optional<double>> current,
                                                         std::span<const double> reference) {
  if (current.size() != reference.size()) throw std::invalid_argument("normalized_difficulty: size mismatch");
  std::vector<std::optional<double>> d(current.size());
  for (std::size_t i = 0; i < current.size(); ++i) {
    if (!(reference[i] > 0.0)) throw std::invalid_argument("normalized_difficulty: reference loss not recorded");
    if (current[i]) d[i] = *current[i] / reference[i];
  }
  return d;
}

}  // namespace hgen
