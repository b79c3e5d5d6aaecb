#pragma once

// Restricted lock-free doubly-linked version list.
//
// Nodes are appended at the head (right end). Any node may be removed once
// its successor has been appended. Removal splices nodes out only when their
// priority exceeds both neighbours' priorities, where priorities come from an
// implicit balanced tree over append counters; this rules out concurrent
// splices of adjacent nodes. Splices next to an unmarked neighbour go through
// a descriptor installed in that neighbour so they can be helped.
//
// In reclaiming mode a spliced-out node's links to its descendants in the
// implicit tree are overwritten with TOP, and find steps right when it meets
// a TOP left link. Unlinked nodes then only reference their ancestors.

#include <atomic>
#include <cstdint>
#include <vector>

#include "mvgc/counted.hpp"
#include "mvgc/types.hpp"

namespace mvgc {

struct VNode;
struct Descriptor;

using NodeRef = rc::CountedPtr<VNode>;
using DescRef = rc::CountedPtr<Descriptor>;
using NodeBlock = rc::Block<VNode>;
using DescBlock = rc::Block<Descriptor>;

enum class Status : std::uint8_t { unmarked = 0, marked = 1, finalized = 2 };

struct VNode {
  static constexpr rc::ObjectKind kObjectKind = rc::ObjectKind::vnode;

  explicit VNode(Value v) : value(v) {}

  const Value value;
  std::atomic<Timestamp> ts{kTbd};
  rc::AtomicCountedPtr<VNode> left;
  rc::AtomicCountedPtr<VNode> right;
  std::atomic<Status> status{Status::unmarked};
  // Set by try_append before the node is published; immutable afterwards.
  std::uint64_t counter = 0;
  std::uint32_t priority = 0;
  ReclaimMode mode = ReclaimMode::reclaiming;
  std::uint64_t list_uid = 0;
  rc::AtomicCountedPtr<Descriptor> left_desc;
  rc::AtomicCountedPtr<Descriptor> right_desc;
};

// Splice record (A, B, C). Written once before publication.
struct Descriptor {
  static constexpr rc::ObjectKind kObjectKind = rc::ObjectKind::descriptor;

  Descriptor(NodeRef a_, NodeRef b_, NodeRef c_)
      : a(std::move(a_)), b(std::move(b_)), c(std::move(c_)) {}

  const NodeRef a;
  const NodeRef b;
  const NodeRef c;
};

inline NodeRef make_node(Value v) { return rc::make_counted<VNode>(v); }
inline NodeRef top_link() { return NodeRef::sentinel(rc::kTopBits); }
inline DescRef frozen_desc() { return DescRef::sentinel(rc::kFrozenBits); }

inline bool is_top(const NodeRef& n) { return n.is(rc::kTopBits); }
inline bool is_top(const NodeBlock* b) { return reinterpret_cast<std::uintptr_t>(b) == rc::kTopBits; }
inline bool is_frozen(const DescRef& d) { return d.is(rc::kFrozenBits); }
inline bool is_frozen(const DescBlock* b) {
  return reinterpret_cast<std::uintptr_t>(b) == rc::kFrozenBits;
}

// Priority of the node with the given append counter (counter >= 2). Lower
// values sit closer to the root of the implicit tree.
std::uint32_t priority_of(std::uint64_t counter) noexcept;

struct FindStep {
  std::int64_t source = 0;
  std::int64_t destination = 0;
  bool via_right = false;
  bool source_finalized = false;
};

struct FindTrace {
  std::vector<FindStep> steps;
};

// Per-thread operation counters.
struct ListStats {
  std::uint64_t appends = 0;  // successful
  std::uint64_t removes = 0;
  std::uint64_t remove_rec_calls = 0;
  std::uint64_t splices_won = 0;
  std::uint64_t descriptors_installed = 0;
  // Largest (recursion depth - priority of the removed node) seen; <= 0 when
  // every removeRec chain stayed within the priority bound.
  std::int64_t max_depth_excess = -1'000'000;
  std::uint64_t max_depth = 0;
};

ListStats& list_stats() noexcept;

class VersionList {
 public:
  explicit VersionList(ReclaimMode mode = ReclaimMode::reclaiming);
  ~VersionList() = default;
  VersionList(const VersionList&) = delete;
  VersionList& operator=(const VersionList&) = delete;

  NodeRef get_head() const;

  // Appends node after expected_head (nullptr for the first node). Fails if
  // the head moved. The expected head must have a timestamp set.
  bool try_append(const NodeRef& expected_head, const NodeRef& node);

  // First node at or left of start whose timestamp is <= ts, or null.
  static NodeRef find(NodeRef start, Timestamp ts, FindTrace* trace = nullptr);

  // Marks the node, freezes its descriptor fields and splices it out (or
  // leaves it to the last removal among its descendants). Wait-free.
  static void remove(const NodeRef& node);

  // Sets the head to null and returns the previous head. Used before
  // removing the final node of a list that is being discarded.
  NodeRef detach_head();

  // detach_head() followed by remove() on the old head. All other nodes must
  // already be removed, or be removed later, for the list to be reclaimed.
  void retire();

  ReclaimMode mode() const noexcept { return mode_; }
  std::uint64_t uid() const noexcept { return uid_; }
  const rc::AtomicCountedPtr<VNode>& head_field() const noexcept { return head_; }

 private:
  rc::AtomicCountedPtr<VNode> head_;
  ReclaimMode mode_;
  std::uint64_t uid_;
};

// Internal routines, exposed for direct testing.
namespace detail {
bool splice(const NodeRef& a, const NodeRef& b, const NodeRef& c);
bool splice_unmarked_left(const NodeRef& a, const NodeRef& b, const NodeRef& c);
bool splice_unmarked_right(const NodeRef& a, const NodeRef& b, const NodeRef& c);
void help(const DescRef& desc);
bool valid_and_frozen(const NodeRef& node);
void remove_rec(const NodeRef& node, std::uint64_t depth, std::uint32_t root_priority);
}  // namespace detail

}  // namespace mvgc
