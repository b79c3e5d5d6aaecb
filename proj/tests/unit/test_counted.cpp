#include <gtest/gtest.h>

#include <thread>
#include <vector>

#include "mvgc/counted.hpp"
#include "mvgc/version_list.hpp"

using namespace mvgc;

namespace {
std::int64_t live_vnodes() { return rc::ledger().snapshot().live_vnodes; }
}  // namespace

TEST(Counted, HandleKeepsNodeAlive) {
  auto base = live_vnodes();
  rc::AtomicCountedPtr<VNode> field;
  field.store(make_node(5));
  NodeRef h = rc::acquire(field);
  field.store(nullptr);
  EXPECT_EQ(live_vnodes(), base + 1);
  EXPECT_EQ(h->value, 5);
  rc::release(h);
  EXPECT_EQ(live_vnodes(), base);
}

TEST(Counted, ManyHandlesCount) {
  NodeRef n = make_node(1);
  std::vector<NodeRef> copies(10, n);
  EXPECT_EQ(n.use_count(), 11);
}

TEST(Counted, CasAdjustsCounts) {
  rc::AtomicCountedPtr<VNode> f;
  NodeRef x = make_node(1), y = make_node(2);
  f.store(x);
  EXPECT_EQ(x.use_count(), 2);
  EXPECT_TRUE(rc::counted_field_cas(f, x, y));
  EXPECT_EQ(x.use_count(), 1);
  EXPECT_EQ(y.use_count(), 2);
  EXPECT_FALSE(rc::counted_field_cas(f, x, y));
  EXPECT_EQ(x.use_count(), 1);
  EXPECT_EQ(y.use_count(), 2);
}

TEST(Counted, LongChainDestroysWithoutRecursion) {
  auto base = live_vnodes();
  {
    NodeRef head = make_node(0);
    NodeRef cur = head;
    for (int i = 1; i < 200000; ++i) {
      NodeRef next = make_node(i);
      cur->left.store(next);
      cur = next;
    }
  }
  EXPECT_EQ(live_vnodes(), base);
}

TEST(Counted, CascadeDecrementsBoundedByUpdates) {
  auto before = rc::thread_stats();
  {
    NodeRef head = make_node(0);
    NodeRef cur = head;
    for (int i = 1; i < 1000; ++i) {
      NodeRef next = make_node(i);
      cur->left.store(next);
      cur = next;
    }
  }
  auto after = rc::thread_stats();
  EXPECT_LE(after.cascade_decrements - before.cascade_decrements,
            after.field_updates - before.field_updates + 1);
}

TEST(Counted, ConcurrentLoadsAndStores) {
  auto base = live_vnodes();
  {
    rc::AtomicCountedPtr<VNode> f;
    f.store(make_node(0));
    std::atomic<bool> stop{false};
    std::vector<std::thread> readers;
    for (int t = 0; t < 4; ++t) {
      readers.emplace_back([&] {
        while (!stop.load()) {
          NodeRef h = f.load();
          ASSERT_TRUE(h.is_object());
          ASSERT_GE(h->value, 0);
        }
      });
    }
    for (int i = 1; i < 200000; ++i) f.store(make_node(i));
    stop = true;
    for (auto& t : readers) t.join();
  }
  EXPECT_EQ(live_vnodes(), base);
}

TEST(CountedDeath, DoubleReleaseAborts) {
  NodeRef n = make_node(1);
  rc::release(n);
  EXPECT_DEATH(rc::release(n), "contract violated");
}
