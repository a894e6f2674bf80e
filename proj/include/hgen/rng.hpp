// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

namespace hgen {

using Rng = std::mt19937_64;

// Purposes of derived random streams. Every stochastic decision in the
// library draws from a stream keyed by (run seed, purpose, indices), so
// results do not depend on evaluation order or thread count.
enum class Stream : std::uint64_t {
  kSchema = 1,
  kLatent = 2,
  kSample = 3,
  kInit = 4,
  kShuffle = 5,
  kMask = 6,
  kEvalPool = 7,
  kFinetuneShuffle = 8,
  kOracle = 9,
};

// SplitMix64 finaliser.
std::uint64_t splitmix64(std::uint64_t x);

std::uint64_t derive_seed(std::uint64_t seed, Stream purpose, std::uint64_t a = 0,
                          std::uint64_t b = 0);

inline Rng make_stream(std::uint64_t seed, Stream purpose, std::uint64_t a = 0,
                       std::uint64_t b = 0) {
  return Rng(derive_seed(seed, purpose, a, b));
}

// Uniform in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n). n must be positive.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

// Standard normal via Box-Muller; does not cache the second variate so the
// stream position depends only on the number of calls.
double standard_normal(Rng& rng);

}  // namespace hgen
