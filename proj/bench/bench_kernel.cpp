// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

// Serial reference against the OpenMP batch kernel on a benchmark-shaped
// schema. Both policies produce the same losses; only wall time differs.

#include <benchmark/benchmark.h>

#include "hgen/batch_kernel.hpp"
#include "hgen/train.hpp"

namespace {

using namespace hgen;

struct Workload {
  explicit Workload(int batch_size) {
    SyntheticConfig sc;
    sc.n_samples = static_cast<std::size_t>(batch_size) * 2;
    schema = default_benchmark_schema(sc);
    const std::vector<RawSample> raw = generate_dataset(schema, sc);
    TrainConfig c;
    c.batch_size = batch_size;
    c.train_fraction = 0.5;
    state = init_state(schema, raw, c);
    const TokenData d = tokenize_split(state, raw);
    batch = pretrain_mask(state, d.train, 1);
  }
  DatasetSchema schema;
  ModelState state;
  std::vector<TokenizedSample> batch;
};

void run(benchmark::State& bs, ExecPolicy policy) {
  const Workload w(static_cast<int>(bs.range(0)));
  KernelOptions opts;
  opts.scaling = QueryScaling::kDifficulty;
  opts.balanced = true;
  opts.cos_scale = w.state.config.cos_scale;
  opts.policy = policy;
  for (auto _ : bs) {
    BatchResult r = run_batch(w.schema, w.state.model, w.state.params, w.batch, opts);
    benchmark::DoNotOptimize(r.objective);
  }
  bs.SetItemsProcessed(bs.iterations() * bs.range(0));
}

void BM_RunBatchSerial(benchmark::State& bs) { run(bs, ExecPolicy::kSerial); }
void BM_RunBatchParallel(benchmark::State& bs) { run(bs, ExecPolicy::kParallel); }

BENCHMARK(BM_RunBatchSerial)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RunBatchParallel)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
