// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <omp.h>

#include <cmath>
#include <map>
#include <utility>

#include "hgen/batch_kernel.hpp"
#include "test_util.hpp"

namespace hgen {
namespace {

struct Fixture {
  explicit Fixture(int n_features = 6, int dim = 8, std::uint64_t seed = 3)
      : schema(testing::small_schema(n_features)), model(testing::small_model(schema, dim)),
        params(init_params(model, seed)), rng(make_stream(seed, Stream::kOracle)) {
    testing::randomize(params, rng, 0.5);
  }
  std::vector<TokenizedSample> batch(int n, double p_mask) {
    std::vector<TokenizedSample> b;
    for (int k = 0; k < n; ++k) {
      b.push_back(testing::random_masked(schema, model, rng, p_mask, 1 + static_cast<int>(uniform_index(rng, 10))));
    }
    return b;
  }
  DatasetSchema schema;
  ModelLayout model;
  std::vector<double> params;
  Rng rng;
};

// Per-field mean negative log-probability computed sample by sample with the
// public single-sample API.
std::vector<std::optional<double>> oracle_losses(const Fixture& f, const std::vector<TokenizedSample>& batch,
                                                 double scale) {
  const auto& pl = f.model.params;
  std::vector<std::optional<double>> out(f.schema.num_fields());
  for (int i = 0; i < f.schema.num_fields(); ++i) {
    const bool seq = f.schema.fields[i].kind == FieldKind::kSequence;
    const bool label = i == f.schema.label_index();
    std::map<std::vector<std::int32_t>, RowVector> cands;
    for (const auto& x : batch) {
      if (seq) {
        cands[x.sequences[i]] = encode_sequence(x.sequences[i], f.model, f.params, i);
      } else {
        cands[{x.original[i]}] = pl.map(std::as_const(f.params), f.model.table[i]).row(x.original[i]);
      }
    }
    if (label) {
      for (int y : {0, 1}) cands[{y}] = pl.map(std::as_const(f.params), f.model.table[i]).row(y);
    }
    double sum = 0.0;
    int count = 0;
    for (const auto& x : batch) {
      if (!x.masked[i]) continue;
      ++count;
      const std::vector<std::int32_t> key = seq ? x.sequences[i] : std::vector<std::int32_t>{x.original[i]};
      std::vector<RowVector> neg;
      for (const auto& [k, e] : cands) {
        if (k != key) neg.push_back(e);
      }
      if (neg.empty()) break;
      const RowVector ctx = denoise_sample(x, f.model, f.params, QueryScaling::kDifficulty).row(i);
      sum -= batch_softmax_logprob(ctx, cands.at(key), neg, scale);
    }
    if (count > 0 && cands.size() >= 2) out[i] = sum / count;
  }
  return out;
}

TEST(BatchKernel, LossesMatchSingleSampleOracle) {
  for (double scale : {1.0, 5.0}) {
    Fixture f(6, 8, 4);
    const TensorSlot& ds = f.model.params.slot(f.model.difficulty);
    for (int i = 0; i < ds.cols; ++i) f.params[ds.offset + i] = 0.3 * standard_normal(f.rng);
    const auto batch = f.batch(24, 0.5);
    KernelOptions opts;
    opts.scaling = QueryScaling::kDifficulty;
    opts.balanced = true;
    opts.cos_scale = scale;
    const BatchResult r = run_batch(f.schema, f.model, f.params, batch, opts);
    const auto want = oracle_losses(f, batch, scale);
    double uniform = 0.0, balanced = 0.0;
    for (int i = 0; i < f.schema.num_features(); ++i) {
      ASSERT_EQ(r.losses.feature[i].has_value(), want[i].has_value()) << i;
      if (!want[i]) continue;
      EXPECT_NEAR(*r.losses.feature[i], *want[i], 1e-12) << i;
      const double s = f.params[ds.offset + i];
      uniform += *want[i];
      balanced += std::exp(-s) * *want[i] + s / 2;
    }
    ASSERT_TRUE(r.losses.label.has_value());
    EXPECT_NEAR(*r.losses.label, *want.back(), 1e-12);
    EXPECT_NEAR(r.objective, balanced + *want.back(), 1e-11);
    opts.balanced = false;
    EXPECT_NEAR(run_batch(f.schema, f.model, f.params, batch, opts).objective, uniform + *want.back(), 1e-11);
  }
}

TEST(BatchKernel, AbsentFields) {
  Fixture f(4);
  auto batch = f.batch(10, 0.0);
  for (auto& x : batch) {
    // Field 1 masked everywhere but with one distinct value; field 0 never
    // masked; the label masked with a single class in the batch.
    x.original[1] = 2;
    x.tokens[1] = f.model.mask_row[1];
    x.masked[1] = 1;
    x.original.back() = 0;
    x.tokens.back() = f.model.mask_row.back();
    x.masked.back() = 1;
  }
  const BatchResult r = run_batch(f.schema, f.model, f.params, batch, KernelOptions{});
  EXPECT_EQ(r.masked_count[0], 0);
  EXPECT_FALSE(r.losses.feature[0].has_value());
  EXPECT_EQ(r.candidate_count[1], 1);
  EXPECT_FALSE(r.losses.feature[1].has_value());
  EXPECT_EQ(r.candidate_count.back(), 2);
  EXPECT_TRUE(r.losses.label.has_value());
  EXPECT_EQ(r.objective, *r.losses.label);
}

TEST(BatchKernel, UniformScoresGiveLogK) {
  // Identical candidate embeddings: every softmax is uniform over K.
  Fixture f(4);
  auto batch = f.batch(12, 0.0);
  const TensorSlot& t0 = f.model.params.slot(f.model.table[0]);
  for (int r = 1; r < t0.rows; ++r) {
    for (int c = 0; c < t0.cols; ++c) f.params[t0.offset + r * t0.cols + c] = f.params[t0.offset + c];
  }
  std::map<int, int> distinct;
  for (auto& x : batch) {
    x.masked[0] = 1;
    x.tokens[0] = f.model.mask_row[0];
    distinct[x.original[0]]++;
  }
  const BatchResult r = run_batch(f.schema, f.model, f.params, batch, KernelOptions{});
  ASSERT_EQ(r.candidate_count[0], static_cast<int>(distinct.size()));
  EXPECT_NEAR(*r.losses.feature[0], std::log(static_cast<double>(distinct.size())), 1e-12);
}

void expect_same(const BatchResult& a, const BatchResult& b, double tol) {
  ASSERT_EQ(a.grad.size(), b.grad.size());
  EXPECT_NEAR(a.objective, b.objective, tol);
  for (std::size_t j = 0; j < a.grad.size(); ++j) ASSERT_NEAR(a.grad[j], b.grad[j], tol) << j;
}

TEST(BatchKernel, SerialAndParallelAgree) {
  for (int n : {1, 15, 16, 17, 70}) {
    Fixture f(8, 8, 10 + n);
    const auto batch = f.batch(n, 0.5);
    KernelOptions opts;
    opts.scaling = QueryScaling::kDifficulty;
    opts.balanced = true;
    opts.cos_scale = 5.0;
    opts.policy = ExecPolicy::kSerial;
    const BatchResult serial = run_batch(f.schema, f.model, f.params, batch, opts);
    opts.policy = ExecPolicy::kParallel;
    const BatchResult parallel = run_batch(f.schema, f.model, f.params, batch, opts);
    expect_same(serial, parallel, 1e-10);
  }
}

TEST(BatchKernel, ParallelIsIndependentOfThreadCount) {
  Fixture f(8, 16, 5);
  const auto batch = f.batch(100, 0.5);
  KernelOptions opts;
  opts.scaling = QueryScaling::kDifficulty;
  opts.balanced = true;
  const int saved = omp_get_max_threads();
  std::vector<BatchResult> results;
  for (int threads : {1, 2, 3, 8}) {
    omp_set_num_threads(threads);
    results.push_back(run_batch(f.schema, f.model, f.params, batch, opts));
  }
  omp_set_num_threads(saved);
  for (const auto& r : results) {
    EXPECT_EQ(r.objective, results[0].objective);
    EXPECT_EQ(r.grad, results[0].grad);
  }
}

TEST(BatchKernel, LossOnlyMatchesFullPass) {
  Fixture f;
  const auto batch = f.batch(20, 0.5);
  KernelOptions opts;
  const BatchResult full = run_batch(f.schema, f.model, f.params, batch, opts);
  opts.compute_grad = false;
  const BatchResult lo = run_batch(f.schema, f.model, f.params, batch, opts);
  EXPECT_EQ(full.objective, lo.objective);
  EXPECT_TRUE(lo.grad.empty());
  EXPECT_EQ(full.grad.size(), f.params.size());
}

TEST(BatchKernel, NonFiniteLossNamesField) {
  Fixture f(4);
  auto batch = f.batch(8, 0.0);
  for (auto& x : batch) {
    x.masked[0] = 1;
    x.tokens[0] = f.model.mask_row[0];
  }
  const TensorSlot& t0 = f.model.params.slot(f.model.table[0]);
  f.params[t0.offset + static_cast<std::size_t>(batch[0].original[0]) * t0.cols] = std::nan("");
  try {
    run_batch(f.schema, f.model, f.params, batch, KernelOptions{});
    FAIL() << "expected an error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find(f.schema.fields[0].name), std::string::npos) << e.what();
  }
}

TEST(BatchKernel, Errors) {
  Fixture f;
  EXPECT_THROW(run_batch(f.schema, f.model, f.params, std::vector<TokenizedSample>{}, KernelOptions{}),
               std::invalid_argument);
  auto batch = f.batch(3, 0.0);
  batch[1].tokens[0] = 1000;
  EXPECT_THROW(run_batch(f.schema, f.model, f.params, batch, KernelOptions{}), std::out_of_range);
}

}  // namespace
}  // namespace hgen
