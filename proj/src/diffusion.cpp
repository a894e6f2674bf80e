// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

#include "hgen/diffusion.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hgen {

NoiseSchedule::NoiseSchedule(const DatasetSchema& schema, int timesteps) : timesteps_(timesteps) {
  if (timesteps < 1) throw std::invalid_argument("NoiseSchedule: T must be >= 1");
  const double log_vmax = std::log(static_cast<double>(std::max(2, schema.max_feature_cardinality())));
  kappa_.reserve(schema.fields.size());
  for (const FieldSpec& f : schema.fields) {
    kappa_.push_back(1.0 + std::log(static_cast<double>(f.cardinality)) / log_vmax);
  }
}

double NoiseSchedule::value(int field, int t) const {
  if (t < 0 || t > timesteps_) throw std::out_of_range("NoiseSchedule: t outside [0, T]");
  if (t == 0) return 0.0;
  if (t == timesteps_) return 1.0;
  const double base = 1.0 - std::cos(std::numbers::pi * t / (2.0 * timesteps_));
  return std::pow(base, kappa_[field]);
}

TokenizedSample forward_mask(const TokenizedSample& clean, const NoiseSchedule& schedule, int t, Rng& rng,
                             const std::vector<int>& mask_rows, MaskMode mode) {
  TokenizedSample out = clean;
  out.t = t;
  const int nf = clean.num_fields();
  const int label = nf - 1;
  for (int i = 0; i < nf; ++i) {
    bool mask;
    if (mode == MaskMode::kCtrScoring) {
      mask = i == label;
    } else {
      mask = uniform01(rng) < schedule.value(i, t);
    }
    out.masked[i] = mask ? 1 : 0;
    out.tokens[i] = mask ? mask_rows[i] : clean.original[i];
  }
  return out;
}

int sample_timestep(Rng& rng, int timesteps) {
  if (timesteps < 1) throw std::invalid_argument("sample_timestep: T must be >= 1");
  return 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(timesteps)));
}

}  // namespace hgen
