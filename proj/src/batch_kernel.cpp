// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

#include "hgen/batch_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <stdexcept>
#include <unordered_map>

#include "nn_ops.hpp"

namespace hgen {
namespace {

struct SampleWork {
  std::vector<SequenceTrace> seq;
  std::vector<RowVector> enc;
  ForwardTrace trace;
  Matrix context;
  Matrix d_context;
  Matrix d_inputs;
  std::vector<RowVector> d_enc;
  std::vector<std::uint8_t> has_d_enc;
};

struct FieldWork {
  bool present = false;
  int masked = 0;
  double loss_sum = 0.0;
  std::vector<int> rep;  // representative sample of each candidate
  std::vector<int> row;  // table row of each candidate (-1 for sequences)
  std::vector<RowVector> grad;
};

// Runs fn(i) for i in [0, n), under OpenMP when `parallel`. The first
// exception by index is rethrown after the loop.
template <typename Fn>
void for_each_index(int n, bool parallel, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(static) if (parallel)
  for (int i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void build_candidates(const ModelLayout& model, std::span<const TokenizedSample> batch, int field, bool sequence,
                      bool label, FieldWork& fw) {
  if (label) {
    fw.rep = {-1, -1};
    fw.row = {0, 1};
    return;
  }
  if (sequence) {
    std::map<std::vector<std::int32_t>, int> seen;
    for (int n = 0; n < static_cast<int>(batch.size()); ++n) {
      if (seen.emplace(batch[n].sequences[field], static_cast<int>(fw.rep.size())).second) {
        fw.rep.push_back(n);
        fw.row.push_back(-1);
      }
    }
    return;
  }
  std::unordered_map<std::int32_t, int> seen;
  for (int n = 0; n < static_cast<int>(batch.size()); ++n) {
    const std::int32_t tok = batch[n].original[field];
    if (tok < 0 || tok >= model.mask_row[field]) throw std::out_of_range("run_batch: token out of vocabulary");
    if (seen.emplace(tok, static_cast<int>(fw.rep.size())).second) {
      fw.rep.push_back(n);
      fw.row.push_back(tok);
    }
  }
}

int candidate_index(const FieldWork& fw, std::span<const TokenizedSample> batch, const TokenizedSample& x, int field,
                    bool sequence) {
  // Candidate sets are small; a linear scan keeps the lookup allocation free.
  for (std::size_t c = 0; c < fw.rep.size(); ++c) {
    if (sequence) {
      if (batch[fw.rep[c]].sequences[field] == x.sequences[field]) return static_cast<int>(c);
    } else if (fw.row[c] == x.original[field]) {
      return static_cast<int>(c);
    }
  }
  throw std::logic_error("run_batch: positive missing from candidate set");
}

}  // namespace

BatchResult run_batch(const DatasetSchema& schema, const ModelLayout& model, std::span<const double> params,
                      std::span<const TokenizedSample> batch, const KernelOptions& options) {
  const ParamLayout& pl = model.params;
  const int n_samples = static_cast<int>(batch.size());
  const int p = model.num_positions;
  const int nf = model.num_features;
  const bool parallel = options.policy == ExecPolicy::kParallel;
  const bool grad = options.compute_grad;
  if (n_samples == 0) throw std::invalid_argument("run_batch: empty batch");
  for (const TokenizedSample& x : batch) {
    if (x.num_fields() != p) throw std::invalid_argument("run_batch: sample does not match the schema");
  }
  const ConstMatrixMap s_map = pl.map(params, model.difficulty);
  const std::span<const double> s(s_map.data(), static_cast<std::size_t>(nf));

  // Sequence encodings and forward passes.
  std::vector<SampleWork> work(n_samples);
  for_each_index(n_samples, parallel, [&](int n) {
    SampleWork& w = work[n];
    const TokenizedSample& x = batch[n];
    w.seq.resize(p);
    w.enc.resize(p);
    Matrix inputs(p, model.config.dim);
    for (int i = 0; i < p; ++i) {
      const ConstMatrixMap table = pl.map(params, model.table[i]);
      if (model.encoder[i] >= 0) w.enc[i] = encode_sequence(x.sequences[i], model, params, i, &w.seq[i]);
      if (x.masked[i]) {
        inputs.row(i) = table.row(model.mask_row[i]);
      } else if (model.encoder[i] >= 0) {
        inputs.row(i) = w.enc[i];
      } else {
        const int tok = x.tokens[i];
        if (tok < 0 || tok >= model.mask_row[i]) throw std::out_of_range("run_batch: token out of vocabulary");
        inputs.row(i) = table.row(tok);
      }
    }
    w.context = denoise_forward(inputs, x.t, model, params, options.scaling, &w.trace);
    w.d_context = Matrix::Zero(p, model.config.dim);
  });

  // Per-field losses against in-batch candidates.
  std::vector<FieldWork> fields(p);
  for_each_index(p, parallel, [&](int i) {
    FieldWork& fw = fields[i];
    const bool label = i == schema.label_index();
    const bool sequence = model.encoder[i] >= 0;
    for (const TokenizedSample& x : batch) fw.masked += x.masked[i] != 0;
    build_candidates(model, batch, i, sequence, label, fw);
    fw.present = fw.masked > 0 && fw.rep.size() >= 2;
    if (!fw.present) return;

    const ConstMatrixMap table = pl.map(params, model.table[i]);
    const int k = static_cast<int>(fw.rep.size());
    std::vector<RowVector> unit(k);
    std::vector<double> norm(k);
    for (int c = 0; c < k; ++c) {
      const RowVector e = fw.row[c] >= 0 ? RowVector(table.row(fw.row[c])) : work[fw.rep[c]].enc[i];
      norm[c] = e.norm();
      if (norm[c] == 0.0) throw std::domain_error("run_batch: zero-norm candidate in " + schema.fields[i].name);
      unit[c] = e / norm[c];
    }
    if (grad) fw.grad.assign(k, RowVector::Zero(model.config.dim));
    const double weight = (!label && options.balanced) ? std::exp(-s[i]) : 1.0;
    const double g = weight / fw.masked;
    const double a = options.cos_scale;
    std::vector<double> cosv(k), prob(k);
    for (int n = 0; n < n_samples; ++n) {
      const TokenizedSample& x = batch[n];
      if (!x.masked[i]) continue;
      const int pos = candidate_index(fw, batch, x, i, sequence);
      const RowVector h = work[n].context.row(i);
      const double hn = h.norm();
      if (hn == 0.0) throw std::domain_error("run_batch: zero-norm context in " + schema.fields[i].name);
      const RowVector hu = h / hn;
      for (int c = 0; c < k; ++c) cosv[c] = unit[c].dot(hu);
      double mx = a * cosv[0];
      for (int c = 1; c < k; ++c) mx = std::max(mx, a * cosv[c]);
      double sum = 0.0;
      for (int c = 0; c < k; ++c) {
        prob[c] = std::exp(a * cosv[c] - mx);
        sum += prob[c];
      }
      fw.loss_sum -= a * cosv[pos] - mx - std::log(sum);
      if (!grad) continue;
      RowVector dh = RowVector::Zero(model.config.dim);
      for (int c = 0; c < k; ++c) {
        prob[c] /= sum;
        const double gamma = g * a * (prob[c] - (c == pos ? 1.0 : 0.0));
        dh += gamma * (unit[c] - cosv[c] * hu);
        fw.grad[c] += (gamma / norm[c]) * (hu - cosv[c] * unit[c]);
      }
      work[n].d_context.row(i) = dh / hn;
    }
  });

  BatchResult out;
  out.losses.feature.assign(nf, std::nullopt);
  out.masked_count.resize(p);
  out.candidate_count.resize(p);
  for (int i = 0; i < p; ++i) {
    const FieldWork& fw = fields[i];
    out.masked_count[i] = fw.masked;
    out.candidate_count[i] = static_cast<int>(fw.rep.size());
    if (!fw.present) continue;
    const double loss = fw.loss_sum / fw.masked;
    if (!std::isfinite(loss)) throw std::runtime_error("non-finite loss in field " + schema.fields[i].name);
    if (i == schema.label_index()) {
      out.losses.label = loss;
    } else {
      out.losses.feature[i] = loss;
    }
  }
  out.objective = options.balanced ? self_balancing_loss(out.losses, s) : uniform_loss(out.losses);
  if (!std::isfinite(out.objective)) throw std::runtime_error("non-finite aggregate loss");
  if (!grad) return out;

  // Reverse pass through the denoiser, one dense buffer per chunk.
  const int chunk = parallel ? kSampleChunk : n_samples;
  const int n_chunks = (n_samples + chunk - 1) / chunk;
  const std::size_t dense = pl.dense_size();
  std::vector<std::vector<double>> chunk_grad(n_chunks, std::vector<double>(dense, 0.0));
  for_each_index(n_chunks, parallel, [&](int c) {
    const int end = std::min(n_samples, (c + 1) * chunk);
    for (int n = c * chunk; n < end; ++n) {
      denoise_backward(work[n].trace, work[n].d_context, model, params, 0, chunk_grad[c], work[n].d_inputs);
    }
  });

  out.grad.assign(pl.size(), 0.0);
  std::span<double> g_all(out.grad);
  auto add_row = [&](int slot, int row, const RowVector& v) { pl.map(g_all, slot).row(row) += v; };

  // Route input and candidate gradients to table rows or sequence encoders.
  for (int n = 0; n < n_samples; ++n) {
    SampleWork& w = work[n];
    const TokenizedSample& x = batch[n];
    w.d_enc.assign(p, RowVector());
    w.has_d_enc.assign(p, 0);
    for (int i = 0; i < p; ++i) {
      const RowVector d = w.d_inputs.row(i);
      if (x.masked[i]) {
        add_row(model.table[i], model.mask_row[i], d);
      } else if (model.encoder[i] >= 0) {
        w.d_enc[i] = d;
        w.has_d_enc[i] = 1;
      } else {
        add_row(model.table[i], x.tokens[i], d);
      }
    }
  }
  for (int i = 0; i < p; ++i) {
    const FieldWork& fw = fields[i];
    if (!fw.present) continue;
    for (std::size_t c = 0; c < fw.rep.size(); ++c) {
      if (fw.row[c] >= 0) {
        add_row(model.table[i], fw.row[c], fw.grad[c]);
        continue;
      }
      SampleWork& w = work[fw.rep[c]];
      if (w.has_d_enc[i]) {
        w.d_enc[i] += fw.grad[c];
      } else {
        w.d_enc[i] = fw.grad[c];
        w.has_d_enc[i] = 1;
      }
    }
  }

  // Sequence encoder reverse pass.
  std::vector<std::vector<RowGrad>> chunk_rows(n_chunks);
  for_each_index(n_chunks, parallel, [&](int c) {
    const int end = std::min(n_samples, (c + 1) * chunk);
    for (int n = c * chunk; n < end; ++n) {
      const SampleWork& w = work[n];
      for (int i = 0; i < p; ++i) {
        if (!w.has_d_enc[i]) continue;
        encode_sequence_backward(w.seq[i], w.d_enc[i], model, params, i, chunk_grad[c], chunk_rows[c]);
      }
    }
  });

  for (int c = 0; c < n_chunks; ++c) {
    for (std::size_t j = 0; j < dense; ++j) out.grad[j] += chunk_grad[c][j];
    for (const RowGrad& r : chunk_rows[c]) add_row(r.slot, r.row, r.grad);
  }

  // Loss-path gradient of the log-difficulties.
  if (options.balanced) {
    MatrixMap ds = pl.map(g_all, model.difficulty);
    for (int i = 0; i < nf; ++i) {
      if (out.losses.feature[i]) ds(0, i) += grad_s(*out.losses.feature[i], s[i]);
    }
  }
  return out;
}

}  // namespace hgen
