// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

// Self-balancing aggregation of per-field reconstruction losses with learnable
// log-difficulties s_i:
//
//   L_bal = sum_i [ exp(-s_i) * l_i + s_i / 2 ] + l_label
//   dL/ds_i = 1/2 - exp(-s_i) * l_i,     d2L/ds_i^2 = exp(-s_i) * l_i
//   s_i* = log(2 l_i)                    (unique minimiser for l_i > 0)
//
// Under gradient descent with step eta the deviation from s* contracts by
// |1 - eta/2| per step near the minimiser.

#pragma once

#include <optional>
#include <span>
#include <vector>

namespace hgen {

// Per-field batch-mean losses. Fields with no masked occurrence in the batch
// are absent (std::nullopt) and take no part in the aggregate.
struct FieldLosses {
  std::vector<std::optional<double>> feature;  // length N
  std::optional<double> label;

  int num_present() const;
};

struct DifficultyParams {
  std::vector<double> s;  // length N, starts at 0

  // sigma_i = exp(s_i / 2); read-only view for logging.
  double sigma(int i) const;
};

// Mean of the per-occurrence negative log-probabilities; absent when empty.
std::optional<double> mean_nll(std::span<const double> log_probs);

// Sum over present fields of exp(-s_i) l_i + s_i/2, plus the label loss with
// coefficient one.
double self_balancing_loss(const FieldLosses& losses, std::span<const double> s);

// Equal-weight aggregate: sum of present l_i plus the label loss.
double uniform_loss(const FieldLosses& losses);

// Loss-path gradient for one field.
double grad_s(double loss, double s);
// Vector form over present fields; absent fields get 0.
std::vector<double> grad_s(const FieldLosses& losses, std::span<const double> s);

double second_derivative_s(double loss, double s);

// Throws std::invalid_argument unless loss > 0.
double equilibrium_s(double loss);

// Iterates s <- s - eta * grad_s(loss, s) `steps` times; returns steps + 1
// values starting at s0.
std::vector<double> converge_s(double loss, double s0, double eta, int steps);

// d_i = l_i / l0_i. Throws std::invalid_argument if a reference is not
// positive. Absent entries stay absent.
std::vector<std::optional<double>> normalized_difficulty(std::span<const std::optional<double>> current,
                                                         std::span<const double> reference);

}  // namespace hgen
