// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

#include "hgen/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "hgen/dataset_io.hpp"

namespace hgen {
namespace {

constexpr char kMagic[8] = {'H', 'G', 'E', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out_.write(reinterpret_cast<const char*>(b), 8);
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void doubles(const std::vector<double>& v) {
    u64(v.size());
    for (double x : v) f64(x);
  }
  void ints(const std::vector<std::int64_t>& v) {
    u64(v.size());
    for (std::int64_t x : v) i64(x);
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::uint64_t u64() {
    unsigned char b[8];
    in_.read(reinterpret_cast<char*>(b), 8);
    if (!in_) throw std::runtime_error("checkpoint: truncated data");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t length() {
    const std::uint64_t n = u64();
    if (n > (std::uint64_t{1} << 40)) throw std::runtime_error("checkpoint: implausible length");
    return static_cast<std::size_t>(n);
  }
  std::string str() {
    std::string s(length(), '\0');
    in_.read(s.data(), static_cast<std::streamsize>(s.size()));
    if (!in_) throw std::runtime_error("checkpoint: truncated data");
    return s;
  }
  std::vector<double> doubles() {
    std::vector<double> v(length());
    for (double& x : v) x = f64();
    return v;
  }
  std::vector<std::int64_t> ints() {
    std::vector<std::int64_t> v(length());
    for (std::int64_t& x : v) x = i64();
    return v;
  }

 private:
  std::istream& in_;
};

}  // namespace

void write_checkpoint(std::ostream& out, const ModelState& st) {
  out.write(kMagic, sizeof kMagic);
  Writer w(out);
  w.u64(kVersion);
  w.str(schema_to_json(st.schema));
  w.u64(schema_hash(st.schema));
  w.str(to_json(st.config).dump());
  w.doubles(st.params);
  w.u64(st.binners.size());
  for (const CdfBinner& b : st.binners) {
    w.str(b.field());
    w.i64(b.bins());
    w.doubles(b.thresholds());
  }
  w.doubles(st.optimizer.m);
  w.doubles(st.optimizer.v);
  w.i64(st.optimizer.steps);
  w.i64(static_cast<std::int64_t>(st.stage));
  w.i64(st.pretrain_steps);
  w.i64(st.finetune_steps);
  w.doubles(st.ref_sum);
  w.ints(st.ref_count);
  w.u64(st.ref_recorded ? 1 : 0);
  w.doubles(st.epoch_sum);
  w.ints(st.epoch_count);
  w.doubles(st.last_epoch_mean);
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

ModelState read_checkpoint(std::istream& in, const DatasetSchema* expected) {
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw std::runtime_error("checkpoint: bad magic");
  Reader r(in);
  if (r.u64() != kVersion) throw std::runtime_error("checkpoint: unsupported version");
  ModelState st;
  st.schema = schema_from_json(r.str());
  const std::uint64_t hash = r.u64();
  if (hash != schema_hash(st.schema)) throw std::runtime_error("checkpoint: schema hash mismatch");
  if (expected != nullptr && schema_hash(*expected) != hash) {
    throw std::runtime_error("checkpoint: schema does not match the dataset");
  }
  st.config = train_config_from_json(nlohmann::json::parse(r.str()));
  st.model = build_model_layout(st.schema, st.config.model_config());
  st.params = r.doubles();
  if (st.params.size() != st.model.params.size()) throw std::runtime_error("checkpoint: parameter count mismatch");
  const std::size_t nb = r.length();
  if (nb != static_cast<std::size_t>(st.schema.num_fields())) throw std::runtime_error("checkpoint: binner count");
  for (std::size_t i = 0; i < nb; ++i) {
    std::string field = r.str();
    const auto bins = static_cast<int>(r.i64());
    std::vector<double> thr = r.doubles();
    st.binners.push_back(bins == 0 ? CdfBinner() : CdfBinner(std::move(field), bins, std::move(thr)));
  }
  st.optimizer.m = r.doubles();
  st.optimizer.v = r.doubles();
  st.optimizer.steps = r.i64();
  const std::int64_t stage = r.i64();
  if (stage != 0 && stage != 1) throw std::runtime_error("checkpoint: bad stage");
  st.stage = static_cast<Stage>(stage);
  st.pretrain_steps = r.i64();
  st.finetune_steps = r.i64();
  st.ref_sum = r.doubles();
  st.ref_count = r.ints();
  st.ref_recorded = r.u64() != 0;
  st.epoch_sum = r.doubles();
  st.epoch_count = r.ints();
  st.last_epoch_mean = r.doubles();
  return st;
}

void save_checkpoint(const std::filesystem::path& path, const ModelState& state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  write_checkpoint(out, state);
}

ModelState load_checkpoint(const std::filesystem::path& path, const DatasetSchema* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_checkpoint(in, expected);
}

}  // namespace hgen
