// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

// Line-delimited dataset format.
//
//   data.tsv     one sample per line; feature fields in schema order separated
//                by '\t', label last. Id/Categorical: decimal token. Numerical:
//                shortest round-trip decimal. Sequence: comma-separated tokens
//                (empty string for an empty sequence).
//   schema.json  {"seed": <u64>, "fields": [{"name", "kind", "cardinality",
//                "seq_len", "planted_entropy"}, ...]}
//
// Writing then reading reproduces every value exactly.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "hgen/schema.hpp"

namespace hgen {

std::string schema_to_json(const DatasetSchema& schema);
DatasetSchema schema_from_json(const std::string& text);
// FNV-1a of the canonical JSON; used to tie checkpoints to a schema.
std::uint64_t schema_hash(const DatasetSchema& schema);

void write_samples(std::ostream& out, const DatasetSchema& schema, const std::vector<RawSample>& samples);
std::vector<RawSample> read_samples(std::istream& in, const DatasetSchema& schema);

void save_dataset(const std::filesystem::path& dir, const DatasetSchema& schema,
                  const std::vector<RawSample>& samples);
struct LoadedDataset {
  DatasetSchema schema;
  std::vector<RawSample> samples;
};
LoadedDataset load_dataset(const std::filesystem::path& dir);

}  // namespace hgen
