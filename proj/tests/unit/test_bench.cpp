#include <gtest/gtest.h>

#include "mvgc/bench/workload.hpp"

using namespace mvgc;
using namespace mvgc::bench;

TEST(Bench, RejectsBadRatios) {
  WorkloadSpec s;
  s.update_ratio = 0.7;
  s.snapshot_ratio = 0.4;
  EXPECT_FALSE(validate(s).empty());
  s.snapshot_ratio = -0.1;
  EXPECT_FALSE(validate(s).empty());
  s.snapshot_ratio = 0.3;
  EXPECT_TRUE(validate(s).empty());
}

TEST(Bench, UpdatesOnlyDrainLeavesOneVersionPerList) {
  WorkloadSpec s;
  s.ops = 20'000;
  s.update_ratio = 1.0;
  s.snapshot_ratio = 0.0;
  s.keys = 64;
  MetricsReport r = run(s);
  ASSERT_TRUE(r.ok()) << r.violations.front();
  EXPECT_EQ(r.ops[0], 20'000u);
  EXPECT_EQ(r.final_space.lr_reachable, r.live_lists);
  EXPECT_EQ(r.final_space.L - r.final_space.R, r.live_lists);
}

TEST(Bench, ModesAgreeOnResultsSingleThreaded) {
  WorkloadSpec s;
  s.ops = 20'000;
  s.update_ratio = 0.5;
  s.snapshot_ratio = 0.1;
  s.query_length = 16;
  s.keys = 128;
  s.seed = 42;
  MetricsReport a = run(s);
  s.mode = ReclaimMode::baseline;
  MetricsReport b = run(s);
  ASSERT_TRUE(a.ok());
  ASSERT_TRUE(b.ok());
  EXPECT_EQ(a.results_digest, b.results_digest);
  s.seed = 43;
  EXPECT_NE(run(s).results_digest, b.results_digest);
}

TEST(Bench, SingleThreadedReportsAreReproducible) {
  WorkloadSpec s;
  s.ops = 10'000;
  s.snapshot_ratio = 0.1;
  s.keys = 64;
  s.query_length = 8;
  s.sample_every = 1000;
  auto a = run(s).to_json(false);
  auto b = run(s).to_json(false);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a["space_samples"].size(), 10u);
  EXPECT_EQ(a["schema_version"], kSchemaVersion);
}

TEST(Bench, HeldSnapshotKeepsOutstandingBounded) {
  WorkloadSpec s;
  s.threads = 4;
  s.ops = 100'000;
  s.update_ratio = 0.9;
  s.snapshot_ratio = 0.05;
  s.query_length = 8;
  s.keys = 64;
  s.sample_every = 10'000;
  s.hold_snapshot = true;
  MetricsReport r = run(s);
  ASSERT_TRUE(r.ok()) << r.violations.front();
  ASSERT_FALSE(r.samples.empty());
  for (const Sample& m : r.samples) {
    // 2H plus the tracker's additive term for P = 5 processes.
    EXPECT_LE(m.space.outstanding_deprecated, 2 * m.space.H + 25 * 25 * 3) << "at " << m.ops;
  }
}

TEST(Bench, ConcurrentRunPasses) {
  WorkloadSpec s;
  s.threads = 8;
  s.ops = 200'000;
  s.update_ratio = 0.6;
  s.snapshot_ratio = 0.05;
  s.query_length = 32;
  s.keys = 256;
  s.sample_every = 20'000;
  MetricsReport r = run(s);
  for (const auto& v : r.violations) ADD_FAILURE() << v;
  EXPECT_EQ(r.ops[0] + r.ops[1] + r.ops[2], 200'000u);
  EXPECT_GE(r.samples.size(), 9u);
}
