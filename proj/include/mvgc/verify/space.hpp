#pragma once

// Space accounting for quiescent systems: lr-reachable nodes found by walking
// left and right links from each list head, plus tracker and ledger counts.
// None of these walks are safe while operations run.

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "mvgc/counted.hpp"
#include "mvgc/range_tracker.hpp"
#include "mvgc/version_list.hpp"

namespace mvgc::verify {

struct SpaceMetrics {
  std::uint64_t L = 0;  // successful appends
  std::uint64_t R = 0;  // removes
  std::uint64_t L_max = 0;  // most appends into one list
  std::uint64_t lr_reachable = 0;
  std::uint64_t outstanding_deprecated = 0;
  std::uint64_t H = 0;  // deprecated objects needed by an active announcement
  std::uint64_t K = 0;  // live external handles
  std::uint64_t D = 0;  // necessary data-structure nodes
  std::uint64_t V = 0;  // necessary version nodes: list heads plus needed deprecated versions
  std::int64_t live_vnodes = 0;  // relative to the baseline
  std::int64_t live_descriptors = 0;

  nlohmann::json to_json() const;
};

struct SpaceInputs {
  std::vector<const VersionList*> lists;
  const RangeTracker* tracker = nullptr;
  std::uint64_t appends = 0;
  std::uint64_t removes = 0;
  std::uint64_t handles = 0;
  std::uint64_t dnodes_necessary = 0;
  rc::LedgerSnapshot baseline{};
};

SpaceMetrics measure_space(const SpaceInputs& in);

// Nodes reachable from the list's head through left and right links.
std::uint64_t lr_reachable(const VersionList& list);

// Appends into the list so far, read from the head's counter; 0 for an
// empty or detached list.
std::uint64_t appends_into(const VersionList& list);

// Number of distinct nodes outside the list's lr-reachable set visited by
// following non-TOP links from start (counting start if it is outside).
std::uint64_t unlinked_reach(const VersionList& list, const NodeRef& start);

// Entries held by the tracker whose interval contains an announcement.
std::uint64_t needed_deprecated(const RangeTracker& tracker);

// ceil(log2 n), with ceil_log2(0) = ceil_log2(1) = 0.
std::uint64_t ceil_log2(std::uint64_t n) noexcept;

}  // namespace mvgc::verify
