#include "mvgc/version_list.hpp"

#include <algorithm>
#include <bit>

#include "mvgc/probe.hpp"

namespace mvgc {

using probe::Field;

std::uint32_t priority_of(std::uint64_t counter) noexcept {
  MVGC_EXPECT(counter >= 2);
  auto k = static_cast<std::uint32_t>(std::bit_width(counter) - 1);
  if (std::has_single_bit(counter)) return k;
  return 2 * k + 1 - static_cast<std::uint32_t>(std::countr_zero(counter));
}

ListStats& list_stats() noexcept {
  thread_local ListStats stats;
  return stats;
}

namespace {

rc::AtomicCountedPtr<VNode>& link_field(VNode& n, Field f) {
  return f == Field::left ? n.left : n.right;
}

rc::AtomicCountedPtr<Descriptor>& desc_field(VNode& n, Field f) {
  return f == Field::left_desc ? n.left_desc : n.right_desc;
}

std::uint64_t node_uid(const NodeRef& n) { return static_cast<std::uint64_t>(n.uid()); }

NodeRef read_link(const NodeRef& x, Field f) {
  NodeRef r = link_field(*x, f).load();
  probe::step_read(f, node_uid(x), r.uid());
  return r;
}

// Identity-only read; the result is only compared, never dereferenced.
NodeBlock* peek_link(const NodeRef& x, Field f) {
  NodeBlock* r = link_field(*x, f).peek();
  probe::step_read(f, node_uid(x), rc::uid_of(r));
  return r;
}

bool cas_link(const NodeRef& x, Field f, NodeBlock* expected, const NodeRef& desired) {
  bool ok = link_field(*x, f).compare_exchange(expected, desired);
  probe::step_cas(f, node_uid(x), rc::uid_of(expected), desired.uid(), ok);
  return ok;
}

Status read_status(const NodeRef& x) {
  Status s = x->status.load();
  probe::step_read(Field::status, node_uid(x), static_cast<std::int64_t>(s));
  return s;
}

bool cas_status(const NodeRef& x, Status from, Status to) {
  Status expected = from;
  bool ok = x->status.compare_exchange_strong(expected, to);
  probe::step_cas(Field::status, node_uid(x), static_cast<std::int64_t>(from),
                  static_cast<std::int64_t>(to), ok);
  return ok;
}

DescRef read_desc(const NodeRef& x, Field f) {
  DescRef d = desc_field(*x, f).load();
  probe::step_read(f, node_uid(x), d.uid());
  return d;
}

bool cas_desc(const NodeRef& x, Field f, DescBlock* expected, const DescRef& desired) {
  bool ok = desc_field(*x, f).compare_exchange(expected, desired);
  probe::step_cas(f, node_uid(x), rc::uid_of(expected), desired.uid(), ok);
  return ok;
}

std::uint32_t priority_or_zero(const NodeRef& n) { return n.is_object() ? n->priority : 0; }

// After B is spliced out, overwrite its links that point at descendants in the
// implicit tree (strictly larger priority) with TOP.
void clear_descendant_links(const NodeRef& b) {
  for (Field f : {Field::left, Field::right}) {
    NodeRef target = read_link(b, f);
    if (target.is_object() && target->priority > b->priority) {
      cas_link(b, f, target.block(), top_link());
    }
  }
}

}  // namespace

VersionList::VersionList(ReclaimMode mode) : mode_(mode), uid_(rc::detail::next_uid()) {}

NodeRef VersionList::get_head() const {
  NodeRef h = head_.load();
  probe::step_read(Field::head, uid_, h.uid());
  return h;
}

bool VersionList::try_append(const NodeRef& expected_head, const NodeRef& node) {
  MVGC_EXPECT(node.is_object());
  MVGC_EXPECT(node->counter == 0);  // a node may only be offered to one append
  MVGC_EXPECT(expected_head.is_null() || expected_head->ts.load() != kTbd);
  if (expected_head.is_object()) {
    node->counter = expected_head->counter + 1;
    NodeRef a = read_link(expected_head, Field::left);
    // A TOP left link means expected_head was already spliced out, so it is
    // no longer the head and the CAS below would fail anyway.
    if (is_top(a)) return false;
    if (a.is_object()) cas_link(a, Field::right, nullptr, expected_head);
  } else {
    node->counter = 2;
  }
  node->priority = priority_of(node->counter);
  node->mode = mode_;
  node->list_uid = uid_;
  node->left.store(expected_head);
  probe::mark(probe::Kind::node_init, node_uid(node), static_cast<std::int64_t>(node->counter),
              node->priority, static_cast<std::int64_t>(uid_), expected_head.uid());

  bool ok = head_.compare_exchange(expected_head.block(), node);
  probe::step_cas(Field::head, uid_, expected_head.uid(), node.uid(), ok);
  if (!ok) return false;
  ++list_stats().appends;
  if (expected_head.is_object()) cas_link(expected_head, Field::right, nullptr, node);
  return true;
}

NodeRef VersionList::find(NodeRef start, Timestamp ts, FindTrace* trace) {
  NodeRef cur = std::move(start);
  probe::mark(probe::Kind::find_begin, static_cast<std::uint64_t>(cur.uid()), ts);
  while (cur.is_object()) {
    Timestamp t = cur->ts.load();
    probe::step_read(Field::ts, node_uid(cur), t);
    if (t <= ts) return cur;

    NodeRef next = read_link(cur, Field::left);
    bool via_right = false;
    if (is_top(next)) {
      MVGC_ASSERT(cur->mode == ReclaimMode::reclaiming);
      next = read_link(cur, Field::right);
      via_right = true;
      MVGC_ASSERT(!is_top(next));  // left and right are never both TOP
    }
    probe::mark(probe::Kind::find_step, node_uid(cur), next.uid(), via_right ? 1 : 0);
    if (trace != nullptr) {
      trace->steps.push_back(
          {cur.uid(), next.uid(), via_right, cur->status.load() == Status::finalized});
    }
    cur = std::move(next);
  }
  return nullptr;
}

void VersionList::remove(const NodeRef& node) {
  MVGC_EXPECT(node.is_object());
  MVGC_EXPECT(node->counter != 0);  // only appended nodes can be removed
  ++list_stats().removes;
  probe::mark(probe::Kind::remove_begin, node_uid(node));

  Status prev = node->status.exchange(Status::marked);
  probe::step_write(Field::status, node_uid(node), static_cast<std::int64_t>(Status::marked));
  MVGC_EXPECT(prev == Status::unmarked);  // no node is removed twice

  for (Field f : {Field::left_desc, Field::right_desc}) {
    for (int attempt = 0; attempt < 2; ++attempt) {
      DescRef desc = read_desc(node, f);
      detail::help(desc);
      cas_desc(node, f, desc.block(), frozen_desc());
    }
  }
  detail::remove_rec(node, 1, node->priority);
}

NodeRef VersionList::detach_head() {
  NodeRef old = head_.load();
  head_.store(nullptr);
  probe::step_write(Field::head, uid_, probe::kNone);
  return old;
}

void VersionList::retire() {
  NodeRef old = detach_head();
  if (old.is_object()) remove(old);
}

namespace detail {

bool valid_and_frozen(const NodeRef& node) {
  // rightDesc is frozen second
  if (!node.is_object()) return false;
  DescBlock* d = node->right_desc.peek();
  probe::step_read(Field::right_desc, node_uid(node), rc::uid_of(d));
  return is_frozen(d);
}

void help(const DescRef& desc) {
  if (desc.is_object()) splice(desc->a, desc->b, desc->c);
}

void remove_rec(const NodeRef& b, std::uint64_t depth, std::uint32_t root_priority) {
  auto& stats = list_stats();
  ++stats.remove_rec_calls;
  stats.max_depth = std::max(stats.max_depth, depth);
  stats.max_depth_excess = std::max(
      stats.max_depth_excess, static_cast<std::int64_t>(depth) - static_cast<std::int64_t>(root_priority));
  probe::mark(probe::Kind::remove_rec, node_uid(b), static_cast<std::int64_t>(depth));

  NodeRef a = read_link(b, Field::left);
  NodeRef c = read_link(b, Field::right);
  if (read_status(b) == Status::finalized) return;
  // b was not finalized after both reads, so neither link was TOP.
  MVGC_ASSERT(!is_top(a) && !is_top(c));

  std::uint32_t pa = priority_or_zero(a);
  std::uint32_t pc = priority_or_zero(c);
  std::uint32_t pb = b->priority;

  if (pa < pb && pb > pc) {
    if (splice(a, b, c)) {
      if (valid_and_frozen(a)) {
        if (valid_and_frozen(c) && pc > pa) {
          remove_rec(c, depth + 1, root_priority);
        } else {
          remove_rec(a, depth + 1, root_priority);
        }
      } else if (valid_and_frozen(c)) {
        if (valid_and_frozen(a) && pa > pc) {
          remove_rec(a, depth + 1, root_priority);
        } else {
          remove_rec(c, depth + 1, root_priority);
        }
      }
    }
  } else if (pa > pb && pb > pc) {
    if (splice_unmarked_left(a, b, c) && valid_and_frozen(c)) {
      remove_rec(c, depth + 1, root_priority);
    }
  } else if (pa < pb && pb < pc) {
    if (splice_unmarked_right(a, b, c) && valid_and_frozen(a)) {
      remove_rec(a, depth + 1, root_priority);
    }
  }
}

bool splice(const NodeRef& a, const NodeRef& b, const NodeRef& c) {
  probe::mark(probe::Kind::splice_call, 0, a.uid(), b.uid(), c.uid());
  if (a.is_object() && peek_link(a, Field::right) != b.block()) return false;
  bool won = cas_status(b, Status::marked, Status::finalized);
  if (c.is_object()) cas_link(c, Field::left, b.block(), a);
  if (a.is_object()) cas_link(a, Field::right, b.block(), c);
  if (won) {
    ++list_stats().splices_won;
    if (b->mode == ReclaimMode::reclaiming) clear_descendant_links(b);
  }
  return won;
}

bool splice_unmarked_left(const NodeRef& a, const NodeRef& b, const NodeRef& c) {
  DescRef old_desc = read_desc(a, Field::right_desc);
  if (read_status(a) != Status::unmarked) return false;
  help(old_desc);
  if (peek_link(a, Field::right) != b.block()) return false;
  DescRef new_desc = rc::make_counted<Descriptor>(a, b, c);
  probe::mark(probe::Kind::descriptor, static_cast<std::uint64_t>(new_desc.uid()),
              a.uid(), b.uid(), c.uid());
  if (cas_desc(a, Field::right_desc, old_desc.block(), new_desc)) {
    MVGC_ASSERT(!is_frozen(old_desc));
    ++list_stats().descriptors_installed;
    help(new_desc);
    return true;
  }
  return false;
}

bool splice_unmarked_right(const NodeRef& a, const NodeRef& b, const NodeRef& c) {
  DescRef old_desc = read_desc(c, Field::left_desc);
  if (read_status(c) != Status::unmarked) return false;
  help(old_desc);
  if (peek_link(c, Field::left) != b.block()) return false;
  if (a.is_object() && peek_link(a, Field::right) != b.block()) return false;
  DescRef new_desc = rc::make_counted<Descriptor>(a, b, c);
  probe::mark(probe::Kind::descriptor, static_cast<std::uint64_t>(new_desc.uid()), a.uid(),
              b.uid(), c.uid());
  if (cas_desc(c, Field::left_desc, old_desc.block(), new_desc)) {
    MVGC_ASSERT(!is_frozen(old_desc));
    ++list_stats().descriptors_installed;
    help(new_desc);
    return true;
  }
  return false;
}

}  // namespace detail

}  // namespace mvgc
