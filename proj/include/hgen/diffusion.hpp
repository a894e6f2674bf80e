// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

// Absorbing-state forward process with per-field cosine schedules
//   gamma_i(t) = (1 - cos(pi t / 2T))^kappa_i,  kappa_i = 1 + ln V_i / ln V_max.

#pragma once

#include <cstdint>
#include <vector>

#include "hgen/rng.hpp"
#include "hgen/schema.hpp"

namespace hgen {

// A sample in token space, possibly partially masked at timestep t.
// Sequence fields keep their item list in `sequences`; they are masked as a
// whole (one flag per field, never per item).
struct TokenizedSample {
  std::vector<std::int32_t> original;  // per field; -1 for sequence fields
  std::vector<std::int32_t> tokens;    // original, or the field's mask row
  std::vector<std::vector<std::int32_t>> sequences;
  std::vector<std::uint8_t> masked;
  int t = 0;

  int num_fields() const { return static_cast<int>(masked.size()); }
};

class NoiseSchedule {
 public:
  NoiseSchedule(const DatasetSchema& schema, int timesteps);

  int timesteps() const { return timesteps_; }
  double kappa(int field) const { return kappa_[field]; }
  const std::vector<double>& kappas() const { return kappa_; }
  // Masking probability of `field` at integer t in [0, T]. Throws
  // std::out_of_range otherwise.
  double value(int field, int t) const;

 private:
  int timesteps_;
  std::vector<double> kappa_;
};

enum class MaskMode {
  kJointPretrain,  // every field, label included, masked by its own schedule
  kCtrScoring,     // label masked, all features visible
};

// Requires the mask row index of every field (see ModelLayout::mask_row).
TokenizedSample forward_mask(const TokenizedSample& clean, const NoiseSchedule& schedule, int t, Rng& rng,
                             const std::vector<int>& mask_rows, MaskMode mode = MaskMode::kJointPretrain);

// Uniform over {1, ..., T}.
int sample_timestep(Rng& rng, int timesteps);

}  // namespace hgen
