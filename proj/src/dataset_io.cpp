// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

#include "hgen/dataset_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace hgen {
namespace {

using nlohmann::json;

void append_double(std::string& out, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

template <typename T>
T parse_number(std::string_view s, std::size_t line_no) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error("line " + std::to_string(line_no) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(s.substr(start));
      return parts;
    }
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

std::string schema_to_json(const DatasetSchema& schema) {
  json j;
  j["seed"] = schema.seed;
  j["fields"] = json::array();
  for (const FieldSpec& f : schema.fields) {
    j["fields"].push_back({{"name", f.name},
                           {"kind", std::string(to_string(f.kind))},
                           {"cardinality", f.cardinality},
                           {"seq_len", f.seq_len},
                           {"planted_entropy", f.planted_entropy}});
  }
  return j.dump(2);
}

DatasetSchema schema_from_json(const std::string& text) {
  const json j = json::parse(text);
  DatasetSchema schema;
  schema.seed = j.at("seed").get<std::uint64_t>();
  for (const json& jf : j.at("fields")) {
    FieldSpec f;
    f.name = jf.at("name").get<std::string>();
    f.kind = parse_field_kind(jf.at("kind").get<std::string>());
    f.cardinality = jf.at("cardinality").get<int>();
    f.seq_len = jf.value("seq_len", 0);
    f.planted_entropy = jf.value("planted_entropy", 0.0);
    schema.fields.push_back(std::move(f));
  }
  schema.validate();
  return schema;
}

std::uint64_t schema_hash(const DatasetSchema& schema) {
  const std::string text = schema_to_json(schema);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_samples(std::ostream& out, const DatasetSchema& schema, const std::vector<RawSample>& samples) {
  std::string line;
  const int nf = schema.num_features();
  for (const RawSample& s : samples) {
    line.clear();
    for (int k = 0; k < nf; ++k) {
      const FieldValue& v = s.features[k];
      switch (schema.fields[k].kind) {
        case FieldKind::kId:
        case FieldKind::kCategorical:
          line += std::to_string(std::get<std::int32_t>(v));
          break;
        case FieldKind::kNumerical:
          append_double(line, std::get<double>(v));
          break;
        case FieldKind::kSequence: {
          const auto& seq = std::get<std::vector<std::int32_t>>(v);
          for (std::size_t p = 0; p < seq.size(); ++p) {
            if (p > 0) line += ',';
            line += std::to_string(seq[p]);
          }
          break;
        }
        case FieldKind::kLabel:
          break;
      }
      line += '\t';
    }
    line += std::to_string(s.label);
    line += '\n';
    out << line;
  }
}

std::vector<RawSample> read_samples(std::istream& in, const DatasetSchema& schema) {
  std::vector<RawSample> samples;
  std::string line;
  std::size_t line_no = 0;
  const int nf = schema.num_features();
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cols = split(line, '\t');
    if (static_cast<int>(cols.size()) != nf + 1) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": expected " + std::to_string(nf + 1) +
                               " columns, got " + std::to_string(cols.size()));
    }
    RawSample s;
    s.features.reserve(nf);
    for (int k = 0; k < nf; ++k) {
      const FieldSpec& f = schema.fields[k];
      switch (f.kind) {
        case FieldKind::kId:
        case FieldKind::kCategorical: {
          const auto tok = parse_number<std::int32_t>(cols[k], line_no);
          if (tok < 0 || tok >= f.cardinality) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": token out of vocabulary in " + f.name);
          }
          s.features.emplace_back(tok);
          break;
        }
        case FieldKind::kNumerical:
          s.features.emplace_back(parse_number<double>(cols[k], line_no));
          break;
        case FieldKind::kSequence: {
          std::vector<std::int32_t> seq;
          if (!cols[k].empty()) {
            for (std::string_view part : split(cols[k], ',')) {
              const auto tok = parse_number<std::int32_t>(part, line_no);
              if (tok < 0 || tok >= f.cardinality) {
                throw std::runtime_error("line " + std::to_string(line_no) + ": item out of vocabulary in " +
                                         f.name);
              }
              seq.push_back(tok);
            }
          }
          if (static_cast<int>(seq.size()) > f.seq_len) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": sequence longer than seq_len in " +
                                     f.name);
          }
          s.features.emplace_back(std::move(seq));
          break;
        }
        case FieldKind::kLabel:
          break;
      }
    }
    s.label = parse_number<int>(cols[nf], line_no);
    if (s.label != 0 && s.label != 1) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": label must be 0 or 1");
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

void save_dataset(const std::filesystem::path& dir, const DatasetSchema& schema,
                  const std::vector<RawSample>& samples) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "schema.json");
    out << schema_to_json(schema) << '\n';
    if (!out) throw std::runtime_error("cannot write " + (dir / "schema.json").string());
  }
  std::ofstream out(dir / "data.tsv", std::ios::binary);
  write_samples(out, schema, samples);
  if (!out) throw std::runtime_error("cannot write " + (dir / "data.tsv").string());
}

LoadedDataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream sin(dir / "schema.json");
  if (!sin) throw std::runtime_error("cannot open " + (dir / "schema.json").string());
  std::stringstream buf;
  buf << sin.rdbuf();
  LoadedDataset ds;
  ds.schema = schema_from_json(buf.str());
  std::ifstream din(dir / "data.tsv", std::ios::binary);
  if (!din) throw std::runtime_error("cannot open " + (dir / "data.tsv").string());
  ds.samples = read_samples(din, ds.schema);
  return ds;
}

}  // namespace hgen
