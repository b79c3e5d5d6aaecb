#include <gtest/gtest.h>

#include "mvgc/verify/invariants.hpp"
#include "mvgc/verify/runner.hpp"
#include "mvgc/verify/scenarios.hpp"

using namespace mvgc;
using namespace mvgc::verify;

TEST(Runner, SameSeedSameTrace) {
  auto f = list_mix({ReclaimMode::reclaiming, 2, 0});
  Schedule s{7, {1, 0, 1, 1, 0}};
  auto a = run_schedule(f, s);
  auto b = run_schedule(f, s);
  EXPECT_FALSE(a.trace.events.empty());
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_EQ(trace_to_jsonl(a.trace), trace_to_jsonl(b.trace));
}

TEST(Runner, SmokeChecks) {
  for (int v = 0; v < list_mix_variants(2); ++v) {
    auto f = list_mix({ReclaimMode::reclaiming, 2, v});
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto viol = check_schedule(f, Schedule{seed, {}});
      EXPECT_FALSE(viol) << "variant " << v << " seed " << seed << ": " << viol->invariant << " "
                         << viol->message;
    }
  }
}

namespace {

class IdleScenario final : public Scenario {
 public:
  int num_processes() const override { return 2; }
  void run(int, Context&) override {}
};

// Two processes increment a shared counter with a separate read and write.
class RacyCounter final : public Scenario {
 public:
  int num_processes() const override { return 2; }
  void run(int, Context& ctx) override {
    auto op = ctx.invoke("inc");
    std::int64_t v = x_;
    probe::step_read(probe::Field::none, 0, v);
    x_ = v + 1;
    probe::step_write(probe::Field::none, 0, v + 1);
    ctx.respond(op, {v + 1});
  }
  std::unique_ptr<Oracle> oracle() const override;

 private:
  std::int64_t x_ = 0;
};

class CounterOracle final : public Oracle {
 public:
  std::unique_ptr<Oracle> clone() const override { return std::make_unique<CounterOracle>(*this); }
  bool apply(const Operation& op) override {
    ++x_;
    return !op.completed || op.result.at(0) == x_;
  }
  std::string key() const override { return std::to_string(x_); }

 private:
  std::int64_t x_ = 0;
};

std::unique_ptr<Oracle> RacyCounter::oracle() const { return std::make_unique<CounterOracle>(); }

}  // namespace

TEST(Runner, EmptyScheduleEmptyTrace) {
  auto run = run_schedule([] { return std::make_unique<IdleScenario>(); }, Schedule{});
  EXPECT_TRUE(run.trace.events.empty());
  EXPECT_TRUE(run.history.ops.empty());
}

TEST(Runner, UnregisteredProcessFailsFast) {
  auto f = list_mix({ReclaimMode::reclaiming, 2, 0});
  EXPECT_THROW(run_schedule(f, Schedule{0, {0, 1, 2}}), ScheduleError);
  EXPECT_THROW(run_schedule(f, Schedule{0, {-1}}), ScheduleError);
}

TEST(Runner, ExplicitStepsAreFollowed) {
  auto f = list_mix({ReclaimMode::reclaiming, 2, 2});
  Schedule s{0, {1, 1, 0, 1, 0, 0}};
  auto run = run_schedule(f, s);
  ASSERT_GE(run.choices.size(), s.steps.size());
  for (std::size_t i = 0; i < s.steps.size(); ++i) EXPECT_EQ(run.choices[i].chosen, s.steps[i]);
  // Every choice resumes one process until its next step, so events between
  // consecutive steps all belong to the chosen process.
  for (const auto& e : run.trace.events) EXPECT_TRUE(e.process >= -1 && e.process < 2);
}

TEST(Runner, ReplayingRecordedChoicesReproducesTrace) {
  auto f = snapshot_mix({ReclaimMode::reclaiming, 2, 1});
  auto a = run_schedule(f, Schedule{99, {}});
  Schedule s{0, {}};
  for (const auto& c : a.choices) s.steps.push_back(c.chosen);
  auto b = run_schedule(f, s);
  EXPECT_EQ(a.trace, b.trace);
}

TEST(Schedule, ParseAndFormat) {
  Schedule s = parse_schedule("# comment\nseed 42\n0\n\n1\n  1 \n");
  EXPECT_EQ(s.seed, 42u);
  EXPECT_EQ(s.steps, (std::vector<int>{0, 1, 1}));
  EXPECT_EQ(parse_schedule(format_schedule(s)), s);
  EXPECT_THROW(parse_schedule("0\n1\n"), ScheduleError);
  EXPECT_THROW(parse_schedule("seed x\n"), ScheduleError);
  EXPECT_THROW(parse_schedule("seed 1\nfoo\n"), ScheduleError);
  EXPECT_THROW(parse_schedule("seed 1\n-3\n"), ScheduleError);
}

TEST(Explore, FindsAndMinimizesARace) {
  ScenarioFactory f = [] { return std::make_unique<RacyCounter>(); };
  ExploreOptions opt;
  opt.depth = 6;
  auto r = explore(f, opt);
  ASSERT_TRUE(r.failure);
  EXPECT_EQ(r.failure->violation.invariant, "linearizability");
  // Letting p1 read first is enough: the default completion then runs p0's
  // read before p1's write.
  EXPECT_EQ(r.failure->schedule.steps, std::vector<int>{1});
  EXPECT_TRUE(check_schedule(f, r.failure->schedule).has_value());
}

TEST(Explore, SmallExhaustiveRunsPass) {
  for (auto mode : {ReclaimMode::baseline, ReclaimMode::reclaiming}) {
    for (int v = 0; v < list_mix_variants(2); ++v) {
      auto r = explore(list_mix({mode, 2, v}), {8, 0, true});
      EXPECT_FALSE(r.failure) << v << ": " << r.failure->violation.message;
      EXPECT_EQ(r.schedules, 256u);
    }
  }
  EXPECT_FALSE(explore(snapshot_mix({ReclaimMode::reclaiming, 2, 0}), {8, 0, true}).failure);
  EXPECT_FALSE(explore(tracker_mix({2}), {8, 0, true}).failure);
}

TEST(Explore, TraversalsAreExercised) {
  InvariantReport total;
  for (int v = 0; v < list_mix_variants(3); ++v) {
    auto f = list_mix({ReclaimMode::reclaiming, 3, v});
    for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
      auto rep = check_invariants(run_schedule(f, Schedule{seed, {}}).trace);
      ASSERT_TRUE(rep.ok()) << rep.violations[0].message;
      total.forward_steps += rep.forward_steps;
      total.upward_steps += rep.upward_steps;
      total.splice_triples += rep.splice_triples;
      total.finds += rep.finds;
    }
  }
  EXPECT_GT(total.finds, 0u);
  EXPECT_GT(total.forward_steps, 0u);
  EXPECT_GT(total.upward_steps, 0u);
  EXPECT_GT(total.splice_triples, 0u);
}

// ---- invariant checker on hand-written traces ----

namespace {

using probe::Field;
using probe::Kind;

constexpr std::uint64_t kList = 100;

struct TraceBuilder {
  EventTrace t;
  void add(probe::Event e, int process = 0) {
    TraceEvent te;
    te.process = process;
    te.time = t.events.size() + 1;
    te.event = e;
    t.events.push_back(te);
  }
  void init(std::uint64_t n, std::int64_t counter, std::int64_t left) {
    add({Kind::node_init, Field::none, n, counter, priority_of(static_cast<std::uint64_t>(counter)),
         static_cast<std::int64_t>(kList), left, true});
  }
  void cas(Field f, std::uint64_t obj, std::int64_t from, std::int64_t to, bool ok = true, int process = 0) {
    add({Kind::cas, f, obj, from, to, 0, 0, ok}, process);
  }
  void write(Field f, std::uint64_t obj, std::int64_t v) { add({Kind::write, f, obj, 0, v, 0, 0, true}); }
  void read(Field f, std::uint64_t obj, std::int64_t v, int process = 0) {
    add({Kind::read, f, obj, v, 0, 0, 0, true}, process);
  }
  void mark(Kind k, std::uint64_t obj, std::int64_t a, std::int64_t b = 0, std::int64_t c = 0, int process = 0) {
    add({k, Field::none, obj, a, b, c, 0, true}, process);
  }
  void finalize(std::uint64_t n) {
    write(Field::status, n, 1);
    cas(Field::status, n, 1, 2);
  }

  // 16 <-> 17 <-> 18, head 18.
  static TraceBuilder three() {
    TraceBuilder b;
    b.init(16, 2, 0);
    b.cas(Field::head, kList, 0, 16);
    b.init(17, 3, 16);
    b.cas(Field::head, kList, 16, 17);
    b.cas(Field::right, 16, 0, 17);
    b.init(18, 4, 17);
    b.cas(Field::head, kList, 17, 18);
    b.cas(Field::right, 17, 0, 18);
    return b;
  }
};

std::string first(const EventTrace& t) {
  auto v = check_invariants(t).first_violation();
  return v ? v->invariant : "ok";
}

}  // namespace

TEST(Invariants, WellFormedListPasses) {
  auto b = TraceBuilder::three();
  EXPECT_EQ(first(b.t), "ok");
  // Splicing out the middle node.
  b.mark(Kind::splice_call, 0, 16, 17, 18);
  b.finalize(17);
  b.cas(Field::left, 18, 17, 16);
  b.cas(Field::right, 16, 17, 18);
  b.cas(Field::left, 17, 16, probe::kTop);
  EXPECT_EQ(first(b.t), "ok");
}

TEST(Invariants, LinkMovingBackwards) {
  auto b = TraceBuilder::three();
  b.cas(Field::right, 16, 17, 18);
  b.cas(Field::right, 16, 18, 17);
  EXPECT_EQ(first(b.t), "link_monotonicity");
}

TEST(Invariants, FinalizeWithoutMark) {
  auto b = TraceBuilder::three();
  b.cas(Field::status, 17, 1, 2);
  EXPECT_EQ(first(b.t), "status_transition");
}

TEST(Invariants, TopIntoLiveNode) {
  auto b = TraceBuilder::three();
  b.cas(Field::left, 17, 16, probe::kTop);
  EXPECT_EQ(first(b.t), "top_placement");
}

TEST(Invariants, BothLinksTop) {
  auto b = TraceBuilder::three();
  b.finalize(17);
  b.cas(Field::left, 18, 17, 16);
  b.cas(Field::right, 16, 17, 18);
  b.cas(Field::left, 17, 16, probe::kTop);
  b.cas(Field::right, 17, 18, probe::kTop);
  EXPECT_EQ(first(b.t), "both_top");
}

TEST(Invariants, DescriptorAfterFreeze) {
  auto b = TraceBuilder::three();
  b.cas(Field::left_desc, 17, 0, probe::kFrozen);
  b.mark(Kind::descriptor, 50, 16, 17, 18);
  b.cas(Field::left_desc, 17, probe::kFrozen, 50);
  EXPECT_EQ(first(b.t), "freeze_discipline");
}

TEST(Invariants, FailedFreezeStillCounts) {
  auto b = TraceBuilder::three();
  b.cas(Field::right_desc, 16, 0, probe::kFrozen, false);
  b.mark(Kind::descriptor, 50, 16, 17, 18);
  b.cas(Field::right_desc, 16, 0, 50);
  EXPECT_EQ(first(b.t), "freeze_discipline");
}

TEST(Invariants, OverlappingTriples) {
  auto b = TraceBuilder::three();
  b.mark(Kind::splice_call, 0, 0, 16, 17);
  b.mark(Kind::splice_call, 0, 16, 17, 18);
  EXPECT_EQ(first(b.t), "no_overlap");
}

TEST(Invariants, InstalledDescriptorIsATriple) {
  auto b = TraceBuilder::three();
  b.mark(Kind::splice_call, 0, 0, 16, 17);
  b.mark(Kind::descriptor, 50, 16, 17, 18);  // created but not installed: fine
  EXPECT_EQ(first(b.t), "ok");
  b.cas(Field::right_desc, 16, 0, 50);
  EXPECT_EQ(first(b.t), "no_overlap");
}

TEST(Invariants, SkipOverLiveNode) {
  auto b = TraceBuilder::three();
  b.finalize(16);
  b.cas(Field::right, 16, 17, 18);
  EXPECT_EQ(first(b.t), "no_skip");
}

TEST(Invariants, SpliceArgumentsDisagree) {
  auto b = TraceBuilder::three();
  b.mark(Kind::splice_call, 0, 16, 17, 18);
  b.cas(Field::left, 17, 16, 0);
  EXPECT_EQ(first(b.t), "splice_args");
}

TEST(Invariants, QuiescentChainBroken) {
  auto b = TraceBuilder::three();
  b.finalize(17);
  EXPECT_EQ(first(b.t), "quiescent_chain");
  InvariantOptions opt;
  opt.quiescent_end = false;
  EXPECT_TRUE(check_invariants(b.t, opt).ok());
}

TEST(Invariants, ForwardTraversalRevisits) {
  auto b = TraceBuilder::three();
  b.mark(Kind::find_begin, 18, 0, 0, 0, 1);
  b.read(Field::left, 18, 17, 1);
  b.mark(Kind::find_step, 18, 17, 0, 0, 1);
  b.read(Field::left, 18, 17, 1);
  b.mark(Kind::find_step, 18, 17, 0, 0, 1);
  EXPECT_EQ(first(b.t), "traversal_distinct");
}

TEST(Invariants, UpwardTraversalRepeatsSource) {
  auto b = TraceBuilder::three();
  b.finalize(17);
  b.cas(Field::left, 18, 17, 16);
  b.cas(Field::right, 16, 17, 18);
  b.cas(Field::left, 17, 16, probe::kTop);
  b.mark(Kind::find_begin, 17, 0, 0, 0, 1);
  for (int i = 0; i < 2; ++i) {
    b.read(Field::left, 17, probe::kTop, 1);
    b.read(Field::right, 17, 18, 1);
    b.mark(Kind::find_step, 17, 18, 1, 0, 1);
  }
  auto rep = check_invariants(b.t);
  ASSERT_FALSE(rep.ok());
  EXPECT_EQ(rep.violations[0].invariant, "traversal_distinct");
  EXPECT_EQ(rep.upward_steps, 2u);
}

TEST(Invariants, NewFindResetsDistinctness) {
  auto b = TraceBuilder::three();
  for (int i = 0; i < 2; ++i) {
    b.mark(Kind::find_begin, 18, 0, 0, 0, 1);
    b.read(Field::left, 18, 17, 1);
    b.mark(Kind::find_step, 18, 17, 0, 0, 1);
  }
  auto rep = check_invariants(b.t);
  EXPECT_TRUE(rep.ok());
  EXPECT_EQ(rep.finds, 2u);
  EXPECT_EQ(rep.forward_steps, 2u);
}

TEST(Invariants, FindTraceCheck) {
  FindTrace ok{{{18, 17, false, false}, {17, 16, false, false}}};
  EXPECT_FALSE(check_find_trace(ok));
  FindTrace repeated_up{{{17, 18, true, true}, {18, 17, false, true}, {17, 18, true, true}}};
  auto v = check_find_trace(repeated_up);
  ASSERT_TRUE(v);
  EXPECT_EQ(v->invariant, "traversal_distinct");
  FindTrace repeated_fwd{{{18, 17, false, false}, {19, 17, false, false}}};
  EXPECT_TRUE(check_find_trace(repeated_fwd));
}

// ---- oracles ----

TEST(Oracles, SequentialHistoriesAreAccepted) {
  // Seed 0 runs each process to completion in index order, so the recorded
  // history is sequential and the oracle must accept it as recorded.
  std::vector<ScenarioFactory> fs;
  for (int v = 0; v < list_mix_variants(2); ++v) fs.push_back(list_mix({ReclaimMode::reclaiming, 2, v}));
  for (int v = 0; v < list_mix_variants(3); ++v) fs.push_back(list_mix({ReclaimMode::baseline, 3, v}));
  for (int v = 0; v < snapshot_mix_variants(2); ++v) fs.push_back(snapshot_mix({ReclaimMode::reclaiming, 2, v}));
  fs.push_back(tracker_mix({3}));
  for (const auto& f : fs) {
    auto run = run_schedule(f, Schedule{});
    auto v = check_schedule(f, Schedule{});
    EXPECT_FALSE(v) << v->invariant << ": " << v->message;
    for (std::size_t i = 1; i < run.history.ops.size(); ++i) {
      EXPECT_LT(run.history.ops[i - 1].response, run.history.ops[i].invoke);
    }
  }
}

TEST(Oracles, RejectImpossibleResults) {
  TrackerOracle t;
  Operation ann{0, "announce", {}, {5}, 1, 2, true};
  EXPECT_FALSE(t.clone()->apply(ann));
  Operation dep{0, "deprecate", {7, 0, 1}, {8}, 1, 2, true};
  EXPECT_FALSE(t.clone()->apply(dep));

  ChainOracle c;
  c.preload(16, 10);
  c.preload(17, 20);
  Operation find{0, "find", {17, 15}, {17}, 1, 2, true};
  EXPECT_FALSE(c.clone()->apply(find));
  find.result = {16};
  EXPECT_TRUE(c.clone()->apply(find));

  SnapshotOracle s({0, 0});
  Operation snap{0, "snapshot", {0, 1}, {0, 1}, 1, 2, true};
  EXPECT_FALSE(s.clone()->apply(snap));
}

TEST(Linearizability, RealTimeOrderIsRespected) {
  // p0's v_cas(0,0,1) completes before p1 reads; reading 0 is not linearizable.
  History h;
  h.ops.push_back({0, "v_cas", {0, 0, 1}, {1}, 1, 2, true});
  h.ops.push_back({1, "v_read", {0}, {0}, 3, 4, true});
  EXPECT_FALSE(check_linearizable(h, SnapshotOracle({0})).ok);
  // Overlapping: fine.
  h.ops[1].invoke = 1;
  EXPECT_TRUE(check_linearizable(h, SnapshotOracle({0})).ok);
  // A pending write may take effect or not.
  History p;
  p.ops.push_back({0, "v_cas", {0, 0, 1}, {}, 1, 0, false});
  p.ops.push_back({1, "v_read", {0}, {1}, 3, 4, true});
  EXPECT_TRUE(check_linearizable(p, SnapshotOracle({0})).ok);
  p.ops[1].result = {0};
  EXPECT_TRUE(check_linearizable(p, SnapshotOracle({0})).ok);
}
