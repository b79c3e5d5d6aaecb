#include <gtest/gtest.h>

#include <map>
#include <random>
#include <thread>
#include <vector>

#include "mvgc/counted.hpp"
#include "mvgc/snapshot_store.hpp"

using namespace mvgc;

namespace {

struct Fixture : ::testing::Test {
  rc::LedgerSnapshot before = rc::ledger().snapshot();
  void TearDown() override {
    auto after = rc::ledger().snapshot();
    EXPECT_EQ(after.live_vnodes, before.live_vnodes);
    EXPECT_EQ(after.live_descriptors, before.live_descriptors);
  }
};

struct Probe final : DNode {
  explicit Probe(Camera& c, int* freed) : cell(1, c), freed(freed) {}
  ~Probe() override { ++*freed; }
  void for_each_field(const std::function<void(VersionedCAS&)>& fn) override { fn(cell); }
  VersionedCAS cell;
  int* freed;
};

}  // namespace

using Snapshot = Fixture;

TEST_F(Snapshot, FreshCamera) {
  Camera cam({1, 0});
  auto h = cam.register_process();
  EXPECT_EQ(cam.take_snapshot(h), 0);
  EXPECT_EQ(cam.now(), 1);
  cam.unreserve(h);
  EXPECT_GE(cam.take_snapshot(h), 0);
  cam.unreserve(h);
}

TEST_F(Snapshot, ReadAndCas) {
  Camera cam({1, 0});
  auto h = cam.register_process();
  VersionedCAS x(3, cam);
  EXPECT_EQ(x.v_read(), 3);
  EXPECT_TRUE(x.v_cas(h, 3, 3));
  EXPECT_EQ(x.list().get_head()->counter, 2u);
  EXPECT_FALSE(x.v_cas(h, 4, 5));
  EXPECT_TRUE(x.v_cas(h, 3, 8));
  EXPECT_EQ(x.v_read(), 8);
}

TEST_F(Snapshot, VersionsAccumulateUntilFlush) {
  Camera cam({1, 16});
  auto h = cam.register_process();
  VersionedCAS x(0, cam);
  for (int i = 1; i <= 10; ++i) {
    cam.take_snapshot(h);
    cam.unreserve(h);
    ASSERT_TRUE(x.v_cas(h, i - 1, i));
  }
  int n = 0;
  Timestamp prev = kTbd;
  for (NodeRef cur = x.list().get_head(); cur.is_object(); cur = cur->left.load()) {
    EXPECT_LE(cur->ts.load(), prev);
    prev = cur->ts.load();
    ++n;
  }
  EXPECT_EQ(n, 11);
  EXPECT_EQ(cam.counts().vnodes_removed, 0u);
}

TEST_F(Snapshot, ReadVersionSeesSnapshotValue) {
  Camera cam({1, 0});
  auto h = cam.register_process();
  VersionedCAS x(0, cam);
  Timestamp s0 = cam.take_snapshot(h);
  EXPECT_EQ(x.read_version(s0), 0);
  cam.unreserve(h);
  x.v_cas(h, 0, 1);
  Timestamp s = cam.take_snapshot(h);
  for (int i = 2; i < 100; ++i) x.v_cas(h, i - 1, i);
  EXPECT_EQ(x.read_version(s), 1);
  cam.unreserve(h);
}

TEST_F(Snapshot, RandomSequentialMatchesMultiversionMap) {
  std::mt19937_64 rng(5);
  Camera cam({2, 0});
  auto w = cam.register_process();
  auto r = cam.register_process();
  std::vector<std::unique_ptr<VersionedCAS>> cells;
  for (int i = 0; i < 4; ++i) cells.push_back(std::make_unique<VersionedCAS>(0, cam));
  // oracle: per cell, list of (write time, value); time advances on snapshot.
  std::vector<std::map<Timestamp, Value>> hist(4);
  for (auto& m : hist) m[-1] = 0;
  std::vector<std::pair<Timestamp, std::vector<Value>>> snaps;
  for (int step = 0; step < 3000; ++step) {
    if (rng() % 5 == 0) {
      Timestamp s = cam.take_snapshot(r);
      for (int c = 0; c < 4; ++c) {
        Value want = std::prev(hist[c].upper_bound(s))->second;
        ASSERT_EQ(cells[c]->read_version(s), want);
      }
      cam.unreserve(r);
    } else {
      int c = static_cast<int>(rng() % 4);
      Value old = cells[c]->v_read();
      Value nv = static_cast<Value>(rng() % 1000);
      ASSERT_TRUE(cells[c]->v_cas(w, old, nv));
      if (nv != old) hist[c][cam.now()] = nv;
    }
  }
}

TEST_F(Snapshot, DNodeFreedWithoutAnnouncements) {
  int freed = 0;
  Camera cam({1, 2});
  {
    auto h = cam.register_process();
    auto* a = new Probe(cam, &freed);
    cam.dnode_birth(*a);
    cam.take_snapshot(h);
    cam.unreserve(h);
    cam.dnode_retire(*a);
    cam.dnode_free(h, a);
  }
  cam.drain();
  EXPECT_EQ(freed, 1);
}

TEST_F(Snapshot, DNodeRetainedWhileSnapshotInsideLifetime) {
  int freed = 0;
  Camera cam({2, 2});
  auto h = cam.register_process();
  auto q = cam.register_process();
  auto* a = new Probe(cam, &freed);
  cam.dnode_birth(*a);
  Timestamp s = cam.take_snapshot(q);
  EXPECT_LE(a->birth_ts(), s);
  cam.take_snapshot(h);
  cam.unreserve(h);
  cam.dnode_retire(*a);
  EXPECT_LT(s, a->retire_ts());
  cam.dnode_free(h, a);
  cam.drain();
  EXPECT_EQ(freed, 0);
  EXPECT_EQ(a->cell.read_version(s), 1);
  cam.unreserve(q);
  cam.drain();
  EXPECT_EQ(freed, 1);
}

TEST_F(Snapshot, NeverRetiredNeverFreed) {
  int freed = 0;
  {
    Camera cam({1, 2});
    auto* a = new Probe(cam, &freed);
    cam.dnode_birth(*a);
    cam.drain();
    EXPECT_EQ(freed, 0);
    delete a;
  }
  EXPECT_EQ(freed, 1);
}

TEST_F(Snapshot, IntermediateVersionsReclaimed) {
  Camera cam({2, 0});
  auto w = cam.register_process();
  auto r = cam.register_process();
  VersionedCAS x(0, cam);
  x.v_cas(w, 0, 1);
  Timestamp s = cam.take_snapshot(r);
  auto base = rc::ledger().snapshot().live_vnodes;
  for (int i = 2; i < 20000; ++i) {
    cam.take_snapshot(w);
    cam.unreserve(w);
    ASSERT_TRUE(x.v_cas(w, i - 1, i));
  }
  cam.drain();
  EXPECT_LE(rc::ledger().snapshot().live_vnodes - base, 8);
  EXPECT_EQ(x.read_version(s), 1);
  cam.unreserve(r);
}

TEST_F(Snapshot, ConcurrentWritersAndSnapshotReaders) {
  constexpr int kCells = 4;
  Camera cam({4, 0});
  std::vector<std::unique_ptr<VersionedCAS>> cells;
  for (int i = 0; i < kCells; ++i) cells.push_back(std::make_unique<VersionedCAS>(0, cam));
  std::atomic<bool> stop{false};
  std::vector<std::thread> ts;
  // Each writer owns one cell and writes increasing values, so any snapshot
  // must observe each cell's value as non-decreasing over later snapshots.
  for (int t = 0; t < 2; ++t) {
    ts.emplace_back([&, t] {
      auto h = cam.register_process();
      for (Value v = 1; v <= 20000; ++v) {
        for (int c = t; c < kCells; c += 2) ASSERT_TRUE(cells[c]->v_cas(h, v - 1, v));
      }
    });
  }
  for (int t = 0; t < 2; ++t) {
    ts.emplace_back([&] {
      auto h = cam.register_process();
      std::vector<Value> last(kCells, 0);
      for (int i = 0; i < 5000; ++i) {
        Timestamp s = cam.take_snapshot(h);
        for (int c = 0; c < kCells; ++c) {
          Value v = cells[c]->read_version(s);
          ASSERT_GE(v, last[c]);
          last[c] = v;
        }
        cam.unreserve(h);
      }
    });
  }
  for (auto& th : ts) th.join();
  cells.clear();
}

using Map = Fixture;

TEST_F(Map, PutGetErase) {
  Camera cam({1, 0});
  auto h = cam.register_process();
  VersionedMap m(cam, 8);
  EXPECT_FALSE(m.get(3).has_value());
  m.put(h, 3, 30);
  EXPECT_EQ(m.get(3), 30);
  m.put(h, 3, 31);
  EXPECT_EQ(m.get(3), 31);
  EXPECT_TRUE(m.erase(h, 3));
  EXPECT_FALSE(m.erase(h, 3));
  EXPECT_FALSE(m.get(3).has_value());
}

TEST_F(Map, SnapshotViewSeesFrozenState) {
  Camera cam({2, 0});
  auto w = cam.register_process();
  auto r = cam.register_process();
  VersionedMap m(cam, 4);
  m.put(w, 0, 10);
  m.put(w, 1, 11);
  {
    SnapshotView view(m, r);
    m.put(w, 0, 20);
    m.erase(w, 1);
    m.put(w, 2, 22);
    for (int i = 0; i < 200; ++i) {
      m.put(w, 3, i);
      m.erase(w, 3);
    }
    EXPECT_EQ(view.get(0), 10);
    EXPECT_EQ(view.get(1), 11);
    EXPECT_FALSE(view.get(2).has_value());
    EXPECT_FALSE(view.get(3).has_value());
    EXPECT_EQ(view.get(0), 10);
    EXPECT_EQ(view.reads(), 4u);
  }
  EXPECT_EQ(m.get(0), 20);
  cam.drain();
  EXPECT_EQ(cam.counts().dnodes_freed, cam.counts().dnodes_deprecated);
}

TEST(SnapshotDeath, FreeBeforeRetireAborts) {
  int freed = 0;
  Camera cam({1, 2});
  auto h = cam.register_process();
  auto* a = new Probe(cam, &freed);
  cam.dnode_birth(*a);
  EXPECT_DEATH(cam.dnode_free(h, a), "contract violated");
  delete a;
}

TEST(SnapshotDeath, UnreserveTwiceAborts) {
  Camera cam({1, 2});
  auto h = cam.register_process();
  cam.take_snapshot(h);
  cam.unreserve(h);
  EXPECT_DEATH(cam.unreserve(h), "contract violated");
}
