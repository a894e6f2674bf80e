// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

#include "hgen/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "hgen/dataset_io.hpp"
#include "nn_ops.hpp"

namespace hgen {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kFull:
      return "full";
    case Variant::kFix:
      return "fix";
    case Variant::kStd:
      return "std";
    case Variant::kUniform:
      return "uniform";
  }
  throw std::logic_error("unreachable");
}

Variant parse_variant(const std::string& name) {
  if (name == "full") return Variant::kFull;
  if (name == "fix") return Variant::kFix;
  if (name == "std") return Variant::kStd;
  if (name == "uniform") return Variant::kUniform;
  throw std::invalid_argument("unknown variant: " + name);
}

QueryScaling variant_scaling(Variant v) {
  return (v == Variant::kFull || v == Variant::kFix) ? QueryScaling::kDifficulty : QueryScaling::kOff;
}

bool variant_balanced(Variant v) { return v == Variant::kFull || v == Variant::kStd; }

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (pretrain_epochs < 0 || finetune_epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (timesteps < 1) throw std::invalid_argument("timesteps must be >= 1");
  if (log_interval < 1) throw std::invalid_argument("log_interval must be >= 1");
  if (!(l2 >= 0.0)) throw std::invalid_argument("l2 must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0, 1)");
  if (!(cos_scale > 0.0)) throw std::invalid_argument("cos_scale must be positive");
  if (dim < 1 || layers < 1) throw std::invalid_argument("dim and layers must be >= 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw std::invalid_argument("train_fraction must lie in (0, 1)");
  if (threads < 0) throw std::invalid_argument("threads must be >= 0");
}

OptimizerConfig TrainConfig::optimizer_config(bool finetune) const {
  OptimizerConfig c;
  c.kind = optimizer;
  c.lr = (finetune && finetune_lr > 0.0) ? finetune_lr : lr;
  c.momentum = momentum;
  c.l2 = l2;
  return c;
}

ModelConfig TrainConfig::model_config() const {
  ModelConfig c;
  c.dim = dim;
  c.layers = layers;
  c.timesteps = timesteps;
  return c;
}

nlohmann::json to_json(const TrainConfig& c) {
  return nlohmann::json{{"variant", to_string(c.variant)},
                        {"lr", c.lr},
                        {"finetune_lr", c.finetune_lr},
                        {"batch_size", c.batch_size},
                        {"pretrain_epochs", c.pretrain_epochs},
                        {"finetune_epochs", c.finetune_epochs},
                        {"timesteps", c.timesteps},
                        {"seed", c.seed},
                        {"l2", c.l2},
                        {"log_interval", c.log_interval},
                        {"optimizer", to_string(c.optimizer)},
                        {"momentum", c.momentum},
                        {"cos_scale", c.cos_scale},
                        {"dim", c.dim},
                        {"layers", c.layers},
                        {"train_fraction", c.train_fraction},
                        {"threads", c.threads}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  if (!j.is_object()) throw std::invalid_argument("train config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "variant") {
      c.variant = parse_variant(v.get<std::string>());
    } else if (key == "lr") {
      c.lr = v.get<double>();
    } else if (key == "finetune_lr") {
      c.finetune_lr = v.get<double>();
    } else if (key == "batch_size") {
      c.batch_size = v.get<int>();
    } else if (key == "pretrain_epochs") {
      c.pretrain_epochs = v.get<int>();
    } else if (key == "finetune_epochs") {
      c.finetune_epochs = v.get<int>();
    } else if (key == "timesteps") {
      c.timesteps = v.get<int>();
    } else if (key == "seed") {
      c.seed = v.get<std::uint64_t>();
    } else if (key == "l2") {
      c.l2 = v.get<double>();
    } else if (key == "log_interval") {
      c.log_interval = v.get<int>();
    } else if (key == "optimizer") {
      c.optimizer = parse_optimizer_kind(v.get<std::string>());
    } else if (key == "momentum") {
      c.momentum = v.get<double>();
    } else if (key == "cos_scale") {
      c.cos_scale = v.get<double>();
    } else if (key == "dim") {
      c.dim = v.get<int>();
    } else if (key == "layers") {
      c.layers = v.get<int>();
    } else if (key == "train_fraction") {
      c.train_fraction = v.get<double>();
    } else if (key == "threads") {
      c.threads = v.get<int>();
    } else {
      throw std::invalid_argument("unknown train config key: " + key);
    }
  }
  return c;
}

std::span<const double> ModelState::s() const {
  const TensorSlot& slot = model.params.slot(model.difficulty);
  return std::span<const double>(params).subspan(slot.offset, slot.size());
}

std::vector<double> ModelState::reference_losses() const {
  std::vector<double> out(ref_sum.size(), std::numeric_limits<double>::quiet_NaN());
  if (!ref_recorded) return out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (ref_count[i] > 0) out[i] = ref_sum[i] / static_cast<double>(ref_count[i]);
  }
  return out;
}

std::vector<double> ModelState::final_difficulty() const {
  const std::vector<double> ref = reference_losses();
  std::vector<double> d(ref.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < d.size() && i < last_epoch_mean.size(); ++i) {
    if (ref[i] > 0.0) d[i] = last_epoch_mean[i] / ref[i];
  }
  return d;
}

bool operator==(const ModelState& a, const ModelState& b) {
  return schema_hash(a.schema) == schema_hash(b.schema) && to_json(a.config) == to_json(b.config) &&
         a.params == b.params && a.binners == b.binners && a.optimizer == b.optimizer && a.stage == b.stage &&
         a.pretrain_steps == b.pretrain_steps && a.finetune_steps == b.finetune_steps && a.ref_sum == b.ref_sum &&
         a.ref_count == b.ref_count && a.ref_recorded == b.ref_recorded && a.epoch_sum == b.epoch_sum &&
         a.epoch_count == b.epoch_count &&
         std::equal(a.last_epoch_mean.begin(), a.last_epoch_mean.end(), b.last_epoch_mean.begin(),
                    b.last_epoch_mean.end(), [](double x, double y) {
                      return (std::isnan(x) && std::isnan(y)) || x == y;
                    });
}

std::size_t train_size(std::size_t n, double train_fraction) {
  if (n < 2) throw std::invalid_argument("need at least two samples to split");
  const auto k = static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_fraction));
  return std::clamp<std::size_t>(k, 1, n - 1);
}

ModelState init_state(const DatasetSchema& schema, std::span<const RawSample> samples, const TrainConfig& config) {
  config.validate();
  schema.validate();
  ModelState st;
  st.schema = schema;
  st.config = config;
  st.model = build_model_layout(schema, config.model_config());
  const std::size_t n_train = train_size(samples.size(), config.train_fraction);
  st.binners = fit_binners(schema, samples.first(n_train));
  st.params = init_params(st.model, config.seed);
  st.optimizer = make_optimizer_state(config.optimizer_config(false), st.params.size());
  const int nf = schema.num_features();
  st.ref_sum.assign(nf, 0.0);
  st.ref_count.assign(nf, 0);
  st.epoch_sum.assign(nf, 0.0);
  st.epoch_count.assign(nf, 0);
  st.last_epoch_mean.assign(nf, std::numeric_limits<double>::quiet_NaN());
  return st;
}

TokenData tokenize_split(const ModelState& state, std::span<const RawSample> samples) {
  const std::size_t n_train = train_size(samples.size(), state.config.train_fraction);
  TokenData d;
  d.train_raw.assign(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(n_train));
  d.test_raw.assign(samples.begin() + static_cast<std::ptrdiff_t>(n_train), samples.end());
  d.train.resize(d.train_raw.size());
  d.test.resize(d.test_raw.size());
  for (std::size_t i = 0; i < d.train.size(); ++i) d.train[i] = tokenize(state.schema, state.binners, d.train_raw[i]);
  for (std::size_t i = 0; i < d.test.size(); ++i) d.test[i] = tokenize(state.schema, state.binners, d.test_raw[i]);
  return d;
}

std::int64_t steps_per_epoch(std::size_t n_train, int batch_size) {
  if (n_train == 0 || batch_size < 1) throw std::invalid_argument("steps_per_epoch: empty data or bad batch size");
  return static_cast<std::int64_t>((n_train + batch_size - 1) / batch_size);
}

std::vector<std::size_t> epoch_order(std::uint64_t seed, Stream stream, int epoch, std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_stream(seed, stream, static_cast<std::uint64_t>(epoch));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
  return order;
}

std::vector<TokenizedSample> pretrain_mask(const ModelState& state, std::span<const TokenizedSample> batch,
                                           std::int64_t step) {
  const NoiseSchedule schedule(state.schema, state.config.timesteps);
  std::vector<TokenizedSample> out(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    Rng rng = make_stream(state.config.seed, Stream::kMask, static_cast<std::uint64_t>(step), b);
    const int t = sample_timestep(rng, state.config.timesteps);
    out[b] = forward_mask(batch[b], schedule, t, rng, state.model.mask_row);
  }
  return out;
}

TokenizedSample ctr_mask(const ModelState& state, const TokenizedSample& clean) {
  TokenizedSample x = clean;
  const int label = state.schema.label_index();
  std::fill(x.masked.begin(), x.masked.end(), 0);
  x.tokens = x.original;
  x.masked[label] = 1;
  x.tokens[label] = state.model.mask_row[label];
  x.t = 1;
  return x;
}

namespace {

IndexRange difficulty_range(const ModelState& st) {
  const TensorSlot& slot = st.model.params.slot(st.model.difficulty);
  return {slot.offset, slot.offset + slot.size()};
}

KernelOptions kernel_options(const ModelState& st, bool finetune) {
  KernelOptions o;
  o.scaling = variant_scaling(st.config.variant);
  o.balanced = !finetune && variant_balanced(st.config.variant);
  o.cos_scale = st.config.cos_scale;
  return o;
}

void close_epoch(ModelState& st) {
  const std::size_t nf = st.epoch_sum.size();
  if (!st.ref_recorded) {
    st.ref_sum = st.epoch_sum;
    st.ref_count = st.epoch_count;
    st.ref_recorded = true;
  }
  for (std::size_t i = 0; i < nf; ++i) {
    st.last_epoch_mean[i] = st.epoch_count[i] > 0 ? st.epoch_sum[i] / static_cast<double>(st.epoch_count[i])
                                                  : std::numeric_limits<double>::quiet_NaN();
  }
  std::fill(st.epoch_sum.begin(), st.epoch_sum.end(), 0.0);
  std::fill(st.epoch_count.begin(), st.epoch_count.end(), 0);
}

std::vector<TokenizedSample> gather(std::span<const TokenizedSample> data, const std::vector<std::size_t>& order,
                                    std::int64_t j, int batch_size) {
  const std::size_t begin = static_cast<std::size_t>(j) * batch_size;
  const std::size_t end = std::min(order.size(), begin + batch_size);
  std::vector<TokenizedSample> batch;
  batch.reserve(end - begin);
  for (std::size_t k = begin; k < end; ++k) batch.push_back(data[order[k]]);
  return batch;
}

}  // namespace

TrainRecord pretrain_step(ModelState& st, std::span<const TokenizedSample> clean_batch) {
  if (st.stage != Stage::kPretrain) throw std::logic_error("pretrain_step: state is already fine-tuning");
  const std::vector<TokenizedSample> masked = pretrain_mask(st, clean_batch, st.pretrain_steps);
  BatchResult r = run_batch(st.schema, st.model, st.params, masked, kernel_options(st, false));

  TrainRecord rec;
  rec.stage = Stage::kPretrain;
  rec.objective = r.objective;
  rec.label_loss = r.losses.label;
  rec.loss = r.losses.feature;
  rec.s.assign(st.s().begin(), st.s().end());
  rec.difficulty.assign(rec.loss.size(), std::nullopt);
  const std::vector<double> ref = st.reference_losses();
  for (std::size_t i = 0; i < rec.loss.size(); ++i) {
    if (!rec.loss[i]) continue;
    st.epoch_sum[i] += *rec.loss[i];
    ++st.epoch_count[i];
    if (ref[i] > 0.0) rec.difficulty[i] = *rec.loss[i] / ref[i];
  }

  const IndexRange s_range = difficulty_range(st);
  const IndexRange frozen = st.config.variant == Variant::kUniform ? s_range : IndexRange{};
  optimizer_step(st.config.optimizer_config(false), st.optimizer, st.params, r.grad, frozen, s_range);
  ++st.pretrain_steps;
  rec.step = st.step();
  return rec;
}

TrainRecord finetune_step(ModelState& st, std::span<const TokenizedSample> clean_batch) {
  if (st.stage != Stage::kFinetune) throw std::logic_error("finetune_step: state is not in the fine-tuning stage");
  std::vector<TokenizedSample> masked(clean_batch.size());
  for (std::size_t b = 0; b < clean_batch.size(); ++b) masked[b] = ctr_mask(st, clean_batch[b]);
  BatchResult r = run_batch(st.schema, st.model, st.params, masked, kernel_options(st, true));

  TrainRecord rec;
  rec.stage = Stage::kFinetune;
  rec.objective = r.objective;
  rec.label_loss = r.losses.label;
  rec.loss = r.losses.feature;
  rec.s.assign(st.s().begin(), st.s().end());
  rec.difficulty.assign(rec.loss.size(), std::nullopt);

  const IndexRange s_range = difficulty_range(st);
  optimizer_step(st.config.optimizer_config(true), st.optimizer, st.params, r.grad, s_range, s_range);
  ++st.finetune_steps;
  rec.step = st.step();
  return rec;
}

void pretrain(ModelState& st, std::span<const TokenizedSample> train, std::vector<TrainRecord>* log,
              std::int64_t until_step) {
  if (st.stage != Stage::kPretrain) throw std::logic_error("pretrain: state is already fine-tuning");
  const std::int64_t spe = steps_per_epoch(train.size(), st.config.batch_size);
  std::int64_t limit = spe * st.config.pretrain_epochs;
  if (until_step >= 0) limit = std::min(limit, until_step);
  int cached_epoch = -1;
  std::vector<std::size_t> order;
  while (st.pretrain_steps < limit) {
    const int epoch = static_cast<int>(st.pretrain_steps / spe);
    if (epoch != cached_epoch) {
      order = epoch_order(st.config.seed, Stream::kShuffle, epoch, train.size());
      cached_epoch = epoch;
    }
    const auto batch = gather(train, order, st.pretrain_steps % spe, st.config.batch_size);
    TrainRecord rec = pretrain_step(st, batch);
    rec.epoch = epoch;
    if (log != nullptr && st.pretrain_steps % st.config.log_interval == 0) log->push_back(std::move(rec));
    if (st.pretrain_steps % spe == 0) close_epoch(st);
  }
}

void finetune(ModelState& st, std::span<const TokenizedSample> train, std::vector<TrainRecord>* log,
              std::int64_t until_step) {
  if (st.stage == Stage::kPretrain) {
    st.stage = Stage::kFinetune;
    st.optimizer = make_optimizer_state(st.config.optimizer_config(true), st.params.size());
  }
  const std::int64_t spe = steps_per_epoch(train.size(), st.config.batch_size);
  std::int64_t limit = spe * st.config.finetune_epochs;
  if (until_step >= 0) limit = std::min(limit, until_step);
  int cached_epoch = -1;
  std::vector<std::size_t> order;
  while (st.finetune_steps < limit) {
    const int epoch = static_cast<int>(st.finetune_steps / spe);
    if (epoch != cached_epoch) {
      order = epoch_order(st.config.seed, Stream::kFinetuneShuffle, epoch, train.size());
      cached_epoch = epoch;
    }
    const auto batch = gather(train, order, st.finetune_steps % spe, st.config.batch_size);
    TrainRecord rec = finetune_step(st, batch);
    rec.epoch = epoch;
    if (log != nullptr && st.finetune_steps % st.config.log_interval == 0) log->push_back(std::move(rec));
  }
}

double ctr_logit(const ModelState& st, const TokenizedSample& clean) {
  const int label = st.schema.label_index();
  const Matrix ctx = denoise_sample(ctr_mask(st, clean), st.model, st.params, variant_scaling(st.config.variant));
  const ConstMatrixMap table = st.model.params.map(std::span<const double>(st.params), st.model.table[label]);
  const RowVector h = ctx.row(label);
  return cosine(table.row(1), h) - cosine(table.row(0), h);
}

double ctr_score(const ModelState& st, const TokenizedSample& clean) {
  return ops::sigmoid(st.config.cos_scale * ctr_logit(st, clean));
}

std::vector<double> ctr_scores(const ModelState& st, std::span<const TokenizedSample> samples) {
  std::vector<double> out(samples.size());
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = ctr_score(st, samples[i]);
  return out;
}

namespace {

void put_number(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

void put_optional(std::ostream& out, const std::optional<double>& v) {
  if (v) put_number(out, *v);
}

}  // namespace

void write_trainlog_header(std::ostream& out, const DatasetSchema& schema) {
  out << "stage,step,epoch,objective,label_loss";
  for (int i = 0; i < schema.num_features(); ++i) {
    const std::string& n = schema.fields[i].name;
    out << ",loss_" << n << ",s_" << n << ",exp_s_" << n << ",exp_neg_s_" << n << ",d_" << n;
  }
  out << '\n';
}

void write_trainlog_row(std::ostream& out, const TrainRecord& r) {
  out << (r.stage == Stage::kPretrain ? "pretrain" : "finetune") << ',' << r.step << ',' << r.epoch << ',';
  put_number(out, r.objective);
  out << ',';
  put_optional(out, r.label_loss);
  for (std::size_t i = 0; i < r.loss.size(); ++i) {
    out << ',';
    put_optional(out, r.loss[i]);
    out << ',';
    put_number(out, r.s[i]);
    out << ',';
    put_number(out, std::exp(r.s[i]));
    out << ',';
    put_number(out, std::exp(-r.s[i]));
    out << ',';
    put_optional(out, r.difficulty[i]);
  }
  out << '\n';
}

void write_trainlog(std::ostream& out, const DatasetSchema& schema, std::span<const TrainRecord> records) {
  write_trainlog_header(out, schema);
  for (const TrainRecord& r : records) write_trainlog_row(out, r);
}

}  // namespace hgen
