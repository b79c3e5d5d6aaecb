#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <random>
#include <vector>

#include "mvgc/counted.hpp"
#include "mvgc/version_list.hpp"

using namespace mvgc;

namespace {

// Independent restatement of the priority rule for cross-checking.
std::uint32_t priority_oracle(std::uint64_t c) {
  int k = 63;
  while (((c >> k) & 1) == 0) --k;
  if (c == (1ull << k)) return static_cast<std::uint32_t>(k);
  int low = 0;
  while (((c >> low) & 1) == 0) ++low;
  return static_cast<std::uint32_t>(2 * k + 1 - low);
}

std::vector<NodeRef> append_n(VersionList& list, int n, Timestamp first_ts = 10, Timestamp step = 10) {
  std::vector<NodeRef> nodes;
  for (int i = 0; i < n; ++i) {
    NodeRef head = list.get_head();
    NodeRef node = make_node(i);
    EXPECT_TRUE(list.try_append(head, node));
    node->ts.store(first_ts + step * i);
    nodes.push_back(node);
  }
  return nodes;
}

struct LeakCheck : ::testing::Test {
  rc::LedgerSnapshot before = rc::ledger().snapshot();
  void TearDown() override {
    auto after = rc::ledger().snapshot();
    EXPECT_EQ(after.live_vnodes, before.live_vnodes);
    EXPECT_EQ(after.live_descriptors, before.live_descriptors);
  }
};

}  // namespace

TEST(Priority, RightmostPath) {
  EXPECT_EQ(priority_of(2), 1u);
  EXPECT_EQ(priority_of(4), 2u);
  EXPECT_EQ(priority_of(8), 3u);
}

TEST(Priority, HandValues) {
  EXPECT_EQ(priority_of(6), 4u);
  EXPECT_EQ(priority_of(3), 3u);
  EXPECT_EQ(priority_of(5), 5u);
  EXPECT_EQ(priority_of(7), 5u);
}

TEST(Priority, MatchesOracle) {
  for (std::uint64_t c = 2; c <= (1u << 16); ++c) ASSERT_EQ(priority_of(c), priority_oracle(c)) << c;
}

using VersionListTest = LeakCheck;

TEST_F(VersionListTest, FreshListIsEmpty) {
  VersionList list;
  EXPECT_TRUE(list.get_head().is_null());
}

TEST_F(VersionListTest, FirstAppendGetsCounterTwo) {
  VersionList list;
  NodeRef n = make_node(1);
  ASSERT_TRUE(list.try_append(nullptr, n));
  EXPECT_EQ(n->counter, 2u);
  EXPECT_EQ(n->priority, 1u);
  EXPECT_EQ(list.get_head(), n);
  n->ts.store(0);
  list.retire();
}

TEST_F(VersionListTest, StaleAppendFails) {
  VersionList list;
  auto nodes = append_n(list, 2);
  NodeRef late = make_node(9);
  EXPECT_FALSE(list.try_append(nodes[0], late));
  EXPECT_EQ(list.get_head(), nodes[1]);
  VersionList::remove(nodes[0]);
  list.retire();
}

TEST_F(VersionListTest, CountersAndPriorities) {
  VersionList list;
  auto nodes = append_n(list, 3);
  EXPECT_EQ(nodes[0]->counter, 2u);
  EXPECT_EQ(nodes[1]->counter, 3u);
  EXPECT_EQ(nodes[2]->counter, 4u);
  EXPECT_EQ(nodes[0]->priority, 1u);
  EXPECT_EQ(nodes[1]->priority, 3u);
  EXPECT_EQ(nodes[2]->priority, 2u);
  VersionList::remove(nodes[0]);
  VersionList::remove(nodes[1]);
  list.retire();
}

TEST_F(VersionListTest, FindExamples) {
  VersionList list;
  auto nodes = append_n(list, 3);  // ts 10, 20, 30
  NodeRef head = list.get_head();
  EXPECT_EQ(VersionList::find(head, 25), nodes[1]);
  EXPECT_EQ(VersionList::find(head, 30), head);
  EXPECT_TRUE(VersionList::find(head, 5).is_null());
  VersionList::remove(nodes[0]);
  VersionList::remove(nodes[1]);
  list.retire();
}

TEST_F(VersionListTest, RemoveMiddleLinksNeighbours) {
  for (ReclaimMode mode : {ReclaimMode::baseline, ReclaimMode::reclaiming}) {
    VersionList list(mode);
    auto nodes = append_n(list, 3);
    VersionList::remove(nodes[1]);
    EXPECT_EQ(nodes[1]->status.load(), Status::finalized);
    EXPECT_EQ(nodes[0]->right.peek(), nodes[2].block());
    EXPECT_EQ(nodes[2]->left.peek(), nodes[0].block());
    EXPECT_TRUE(is_frozen(nodes[1]->left_desc.peek()));
    EXPECT_TRUE(is_frozen(nodes[1]->right_desc.peek()));
    VersionList::remove(nodes[0]);
    list.retire();
  }
}

TEST_F(VersionListTest, SpliceRejectsWrongNeighbour) {
  VersionList list;
  auto nodes = append_n(list, 3);
  EXPECT_FALSE(detail::splice(nodes[1], nodes[0], nodes[2]));
  EXPECT_EQ(nodes[0]->status.load(), Status::unmarked);
  EXPECT_EQ(nodes[1]->right.peek(), nodes[2].block());
  VersionList::remove(nodes[0]);
  VersionList::remove(nodes[1]);
  list.retire();
}

TEST_F(VersionListTest, SpliceOnFinalizedFails) {
  VersionList list;
  auto nodes = append_n(list, 3);
  VersionList::remove(nodes[1]);
  EXPECT_FALSE(detail::splice(nodes[0], nodes[1], nodes[2]));
  VersionList::remove(nodes[0]);
  list.retire();
}

TEST_F(VersionListTest, RandomRemovalOrderKeepsChainAndFindsCorrectly) {
  std::mt19937_64 rng(7);
  for (ReclaimMode mode : {ReclaimMode::baseline, ReclaimMode::reclaiming}) {
    for (int trial = 0; trial < 50; ++trial) {
      VersionList list(mode);
      int n = 2 + static_cast<int>(rng() % 60);
      auto nodes = append_n(list, n);
      std::vector<int> order(n - 1);
      for (int i = 0; i < n - 1; ++i) order[i] = i;
      std::shuffle(order.begin(), order.end(), rng);
      std::vector<bool> removed(n, false);
      std::size_t cut = rng() % order.size();
      for (std::size_t i = 0; i < cut; ++i) {
        VersionList::remove(nodes[order[i]]);
        removed[order[i]] = true;
      }
      // Walk from the head: exactly the non-finalized nodes, in order. A
      // removed node may stay linked (marked) while a neighbour with a larger
      // priority is still unmarked.
      std::vector<int> seen;
      for (NodeRef cur = list.get_head(); cur.is_object(); cur = cur->left.load()) {
        seen.push_back(static_cast<int>(cur->value));
      }
      std::vector<int> expect;
      for (int i = n - 1; i >= 0; --i) {
        Status s = nodes[i]->status.load();
        EXPECT_EQ(s == Status::unmarked, !removed[i]);
        if (s != Status::finalized) expect.push_back(i);
      }
      EXPECT_EQ(seen, expect);
      // find from the head for timestamps of surviving nodes
      for (int i = 0; i < n; ++i) {
        if (removed[i]) continue;
        NodeRef got = VersionList::find(list.get_head(), 10 + 10 * i + 5);
        ASSERT_EQ(got, nodes[i]);
      }
      for (std::size_t i = cut; i < order.size(); ++i) VersionList::remove(nodes[order[i]]);
      nodes.clear();
      list.retire();
    }
  }
}

TEST_F(VersionListTest, RemovingAllButHeadLeavesOnlyHead) {
  std::mt19937_64 rng(11);
  for (ReclaimMode mode : {ReclaimMode::baseline, ReclaimMode::reclaiming}) {
    VersionList list(mode);
    auto nodes = append_n(list, 1000);
    std::vector<int> order(999);
    for (int i = 0; i < 999; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    for (int i : order) VersionList::remove(nodes[i]);
    for (int i : order) EXPECT_EQ(nodes[i]->status.load(), Status::finalized);
    NodeRef head = list.get_head();
    EXPECT_TRUE(head->left.peek() == nullptr);
    nodes.clear();
    auto live = rc::ledger().snapshot().live_vnodes - before.live_vnodes;
    // Besides the head, only nodes named by a descriptor still installed in
    // the head's left_desc can be alive.
    if (mode == ReclaimMode::reclaiming) {
      EXPECT_LE(live, head->left_desc.peek() != nullptr ? 3 : 1);
    }
    head.reset();
    list.retire();
  }
}
