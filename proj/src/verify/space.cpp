#include "mvgc/verify/space.hpp"

#include <algorithm>
#include <bit>
#include <unordered_set>

namespace mvgc::verify {

namespace {

using Seen = std::unordered_set<const NodeBlock*>;

void walk(const NodeBlock* start, Seen& seen, const Seen* stop_at = nullptr) {
  std::vector<const NodeBlock*> stack;
  if (rc::is_object(start)) stack.push_back(start);
  while (!stack.empty()) {
    const NodeBlock* b = stack.back();
    stack.pop_back();
    if (stop_at != nullptr && stop_at->count(b) != 0) continue;
    if (!seen.insert(b).second) continue;
    const VNode* n = b->object();
    for (const NodeBlock* next : {n->left.peek(), n->right.peek()}) {
      if (rc::is_object(next) && seen.count(next) == 0) stack.push_back(next);
    }
  }
}

Seen reachable_set(const VersionList& list) {
  Seen seen;
  walk(list.head_field().peek(), seen);
  return seen;
}

}  // namespace

std::uint64_t ceil_log2(std::uint64_t n) noexcept {
  return n <= 1 ? 0 : static_cast<std::uint64_t>(std::bit_width(n - 1));
}

std::uint64_t lr_reachable(const VersionList& list) { return reachable_set(list).size(); }

std::uint64_t appends_into(const VersionList& list) {
  const NodeBlock* h = list.head_field().peek();
  return rc::is_object(h) ? h->object()->counter - 1 : 0;
}

std::uint64_t unlinked_reach(const VersionList& list, const NodeRef& start) {
  Seen linked = reachable_set(list);
  Seen outside;
  walk(start.block(), outside, &linked);
  return outside.size();
}

std::uint64_t needed_deprecated(const RangeTracker& tracker) {
  std::vector<Timestamp> ann = tracker.sort_announcements();
  std::uint64_t n = 0;
  for (const Range& r : tracker.held_ranges()) {
    auto it = std::lower_bound(ann.begin(), ann.end(), r.low);
    if (it != ann.end() && *it < r.high) ++n;
  }
  return n;
}

SpaceMetrics measure_space(const SpaceInputs& in) {
  SpaceMetrics m;
  m.L = in.appends;
  m.R = in.removes;
  m.K = in.handles;
  m.D = in.dnodes_necessary;
  std::uint64_t heads = 0;
  for (const VersionList* list : in.lists) {
    m.lr_reachable += lr_reachable(*list);
    m.L_max = std::max(m.L_max, appends_into(*list));
    if (rc::is_object(list->head_field().peek())) ++heads;
  }
  if (in.tracker != nullptr) {
    m.outstanding_deprecated = in.tracker->counts().outstanding();
    m.H = needed_deprecated(*in.tracker);
  }
  m.V = heads + m.H;
  rc::LedgerSnapshot now = rc::ledger().snapshot();
  m.live_vnodes = now.live_vnodes - in.baseline.live_vnodes;
  m.live_descriptors = now.live_descriptors - in.baseline.live_descriptors;
  return m;
}

nlohmann::json SpaceMetrics::to_json() const {
  return {{"L", L},
          {"R", R},
          {"L_max", L_max},
          {"lr_reachable", lr_reachable},
          {"outstanding_deprecated", outstanding_deprecated},
          {"H", H},
          {"K", K},
          {"D", D},
          {"V", V},
          {"live_vnodes", live_vnodes},
          {"live_descriptors", live_descriptors}};
}

}  // namespace mvgc::verify
