#pragma once

// Replays a trace against a shadow model of every version list it touches
// and checks the list invariants transition by transition.
//
// Invariant ids:
//   link_monotonicity   right links only move to larger counters, left links
//                       to smaller ones
//   no_overlap          no splice triples (W,X,Y) and (X,Y,Z)
//   splice_args         after splice(X,Y,Z) or a stored (X,Y,Z) descriptor,
//                       X <- Y -> Z (TOP allowed in reclaiming mode)
//   no_skip             links of finalized nodes never jump over a
//                       non-finalized node
//   status_transition   unmarked -> marked -> finalized only
//   freeze_discipline   no descriptor stored after the first freeze attempt,
//                       and FROZEN is never replaced
//   both_top            a node's two links are never both TOP
//   top_placement       TOP only written into finalized nodes and never
//                       overwritten
//   quiescent_chain     at the end, non-finalized nodes form a doubly linked
//                       chain ending at null on both sides
//   traversal_distinct  per find: forward-traversal destinations distinct,
//                       upward-traversal sources distinct, forward steps use
//                       left links

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mvgc/verify/runner.hpp"
#include "mvgc/verify/trace.hpp"
#include "mvgc/version_list.hpp"

namespace mvgc::verify {

struct InvariantOptions {
  bool quiescent_end = true;  // the trace ends with no pending operation
  bool stop_at_first = true;
};

struct InvariantReport {
  std::vector<Violation> violations;
  std::size_t events = 0;
  std::size_t finds = 0;
  std::size_t forward_steps = 0;
  std::size_t upward_steps = 0;
  std::size_t splice_triples = 0;

  bool ok() const noexcept { return violations.empty(); }
  std::optional<Violation> first_violation() const {
    if (violations.empty()) return std::nullopt;
    return violations.front();
  }
};

InvariantReport check_invariants(const EventTrace& trace, const InvariantOptions& options = {});

// Checks that hold for a single find without global state, for traces taken
// from real threads: steps through a right link have distinct sources, and
// left steps out of nodes that were not finalized have distinct destinations.
std::optional<Violation> check_find_trace(const FindTrace& trace);

}  // namespace mvgc::verify
