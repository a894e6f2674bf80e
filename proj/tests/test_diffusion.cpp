// Copyright 2026 The hgen Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "hgen/diffusion.hpp"
#include "test_util.hpp"

namespace hgen {
namespace {

TEST(Schedule, Boundaries) {
  const DatasetSchema s = default_benchmark_schema({});
  const NoiseSchedule sch(s, 100);
  for (int i = 0; i < s.num_fields(); ++i) {
    EXPECT_EQ(sch.value(i, 0), 0.0);
    EXPECT_EQ(sch.value(i, 100), 1.0);
  }
  EXPECT_THROW(sch.value(0, -1), std::out_of_range);
  EXPECT_THROW(sch.value(0, 101), std::out_of_range);
}

TEST(Schedule, MidpointAgainstScalarFormula) {
  const double base = 1.0 - std::cos(3.141592653589793 / 4.0);
  EXPECT_NEAR(base, 0.2929, 5e-5);
  const DatasetSchema s = default_benchmark_schema({});
  const NoiseSchedule sch(s, 100);
  const double vmax = std::log(10000.0);
  for (int i = 0; i < s.num_fields(); ++i) {
    const double kappa = 1.0 + std::log(static_cast<double>(s.fields[i].cardinality)) / vmax;
    EXPECT_NEAR(sch.kappa(i), kappa, 1e-15);
    EXPECT_NEAR(sch.value(i, 50), std::pow(base, kappa), 1e-15);
  }
}

TEST(Schedule, MonotoneInTimeAndVocabulary) {
  const DatasetSchema s = default_benchmark_schema({});
  const NoiseSchedule sch(s, 100);
  for (int i = 0; i < s.num_fields(); ++i) {
    for (int t = 1; t <= 100; ++t) EXPECT_GE(sch.value(i, t), sch.value(i, t - 1));
    EXPECT_GE(sch.kappa(i), 1.0);
    for (int j = 0; j < s.num_fields(); ++j) {
      if (s.fields[i].cardinality <= s.fields[j].cardinality) {
        EXPECT_LE(sch.kappa(i), sch.kappa(j));
        // Larger vocabularies mask more slowly.
        for (int t : {10, 50, 90}) EXPECT_GE(sch.value(i, t), sch.value(j, t));
      }
    }
  }
}

struct MaskFixture {
  DatasetSchema schema = testing::small_schema(6);
  ModelLayout model = testing::small_model(schema, 8, 100);
  NoiseSchedule schedule{schema, 100};
};

TEST(ForwardMask, EndpointsAndModes) {
  MaskFixture f;
  Rng rng = make_stream(1, Stream::kOracle);
  for (int trial = 0; trial < 100; ++trial) {
    const TokenizedSample clean = testing::random_clean(f.schema, rng);
    const auto none = forward_mask(clean, f.schedule, 0, rng, f.model.mask_row);
    const auto all = forward_mask(clean, f.schedule, 100, rng, f.model.mask_row);
    const auto ctr = forward_mask(clean, f.schedule, 37, rng, f.model.mask_row, MaskMode::kCtrScoring);
    for (int i = 0; i < f.schema.num_fields(); ++i) {
      EXPECT_EQ(none.masked[i], 0);
      EXPECT_EQ(none.tokens[i], clean.original[i]);
      EXPECT_EQ(all.masked[i], 1);
      EXPECT_EQ(all.tokens[i], f.model.mask_row[i]);
      EXPECT_EQ(all.original[i], clean.original[i]);
      EXPECT_EQ(ctr.masked[i], i == f.schema.label_index() ? 1 : 0);
    }
    EXPECT_EQ(all.sequences, clean.sequences);
  }
}

TEST(ForwardMask, MidpointRatesAndIndependence) {
  MaskFixture f;
  const int nf = f.schema.num_fields();
  Rng rng = make_stream(2, Stream::kOracle);
  constexpr int n = 100000;
  std::vector<double> rate(nf, 0.0);
  std::vector<std::vector<double>> both(nf, std::vector<double>(nf, 0.0));
  const TokenizedSample clean = testing::random_clean(f.schema, rng);
  for (int k = 0; k < n; ++k) {
    const auto x = forward_mask(clean, f.schedule, 50, rng, f.model.mask_row);
    for (int i = 0; i < nf; ++i) {
      // Mask flag and token substitution agree.
      ASSERT_EQ(x.masked[i] != 0, x.tokens[i] == f.model.mask_row[i]);
      rate[i] += x.masked[i];
      for (int j = 0; j < i; ++j) both[i][j] += x.masked[i] * x.masked[j];
    }
  }
  for (int i = 0; i < nf; ++i) {
    rate[i] /= n;
    EXPECT_NEAR(rate[i], f.schedule.value(i, 50), 0.01) << i;
  }
  for (int i = 0; i < nf; ++i) {
    for (int j = 0; j < i; ++j) {
      const double cov = both[i][j] / n - rate[i] * rate[j];
      const double rho = cov / std::sqrt(rate[i] * (1 - rate[i]) * rate[j] * (1 - rate[j]));
      EXPECT_LT(std::abs(rho), 0.02) << i << "," << j;
    }
  }
}

TEST(ForwardMask, SequenceFieldMaskedAsAWhole) {
  MaskFixture f;
  Rng rng = make_stream(3, Stream::kOracle);
  const int seq = 3;
  ASSERT_EQ(f.schema.fields[seq].kind, FieldKind::kSequence);
  for (int k = 0; k < 200; ++k) {
    const TokenizedSample clean = testing::random_clean(f.schema, rng);
    const auto x = forward_mask(clean, f.schedule, 60, rng, f.model.mask_row);
    // One flag per field; the item list itself is never altered.
    ASSERT_EQ(x.masked.size(), static_cast<std::size_t>(f.schema.num_fields()));
    EXPECT_EQ(x.sequences[seq], clean.sequences[seq]);
  }
}

TEST(SampleTimestep, Distribution) {
  Rng rng = make_stream(4, Stream::kOracle);
  for (int k = 0; k < 1000; ++k) EXPECT_EQ(sample_timestep(rng, 1), 1);
  std::vector<int> c2(3, 0);
  for (int k = 0; k < 100000; ++k) ++c2[sample_timestep(rng, 2)];
  EXPECT_EQ(c2[0], 0);
  EXPECT_NEAR(c2[1] / 1e5, 0.5, 0.01);
  EXPECT_NEAR(c2[2] / 1e5, 0.5, 0.01);
  std::vector<int> c(101, 0);
  for (int k = 0; k < 1000000; ++k) ++c[sample_timestep(rng, 100)];
  EXPECT_EQ(c[0], 0);
  double chi2 = 0.0;
  for (int v = 1; v <= 100; ++v) {
    EXPECT_NEAR(c[v] / 1e6, 0.01, 0.001) << v;
    chi2 += (c[v] - 1e4) * (c[v] - 1e4) / 1e4;
  }
  // 99 degrees of freedom; 0.999 quantile is about 149.
  EXPECT_LT(chi2, 149.0);
  EXPECT_THROW(sample_timestep(rng, 0), std::invalid_argument);
}

}  // namespace
}  // namespace hgen
