// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

// Loss and gradient of one batch of masked samples.
//
// Every masked field occurrence is scored against the de-duplicated set of
// true values of that field in the batch (the positive plus in-batch
// negatives) with logits cos_scale * cos(candidate, context). The label
// always scores against both label rows. Feature fields whose candidate set
// has fewer than two entries, or that are never masked, are absent for the
// step.

#pragma once

#include <span>
#include <vector>

#include "hgen/balance.hpp"
#include "hgen/denoiser.hpp"
#include "hgen/diffusion.hpp"
#include "hgen/params.hpp"
#include "hgen/schema.hpp"

namespace hgen {

enum class ExecPolicy {
  kSerial,    // single pass, straight accumulation (reference)
  kParallel,  // fixed-size sample chunks under OpenMP, reduced in chunk order
};

struct KernelOptions {
  QueryScaling scaling = QueryScaling::kOff;
  // Self-balancing aggregate when true, equal weights otherwise.
  bool balanced = false;
  double cos_scale = 1.0;
  bool compute_grad = true;
  ExecPolicy policy = ExecPolicy::kParallel;
};

struct BatchResult {
  FieldLosses losses;
  std::vector<int> masked_count;    // per position
  std::vector<int> candidate_count; // per position
  double objective = 0.0;
  // Gradient of `objective` over the whole flat parameter vector; empty when
  // compute_grad is false.
  std::vector<double> grad;
};

// Samples in a chunk of the parallel policy. Results do not depend on the
// number of threads.
inline constexpr int kSampleChunk = 16;

// Throws std::runtime_error naming the field if a loss is not finite.
BatchResult run_batch(const DatasetSchema& schema, const ModelLayout& model, std::span<const double> params,
                      std::span<const TokenizedSample> batch, const KernelOptions& options);

}  // namespace hgen
