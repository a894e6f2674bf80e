// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

// Binary checkpoint: magic, format version, schema JSON and its hash, train
// config JSON, raw float64 parameters, binners, optimizer moments, step
// counters and the loss accumulators. Doubles are stored as their bit
// patterns so a round trip is exact.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "hgen/train.hpp"

namespace hgen {

void write_checkpoint(std::ostream& out, const ModelState& state);
// Throws std::runtime_error on a bad magic, truncated data or a schema hash
// that does not match the stored schema (or `expected` when given).
ModelState read_checkpoint(std::istream& in, const DatasetSchema* expected = nullptr);

void save_checkpoint(const std::filesystem::path& path, const ModelState& state);
ModelState load_checkpoint(const std::filesystem::path& path, const DatasetSchema* expected = nullptr);

}  // namespace hgen
