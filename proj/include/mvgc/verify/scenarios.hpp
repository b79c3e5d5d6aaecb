#pragma once

// Small concurrent programs for schedule exploration.

#include <string>
#include <vector>

#include "mvgc/types.hpp"
#include "mvgc/verify/runner.hpp"

namespace mvgc::verify {

// Version list with preloaded nodes n0..n{preload-1} (timestamps 10, 20, ...)
// and per-process programs of appends, removes and finds. Every program
// respects the removal assumption: a node is removed at most once and only
// after its successor was appended.
//
// variants with 2 processes:
//   0  p0 appends and removes the old head; p1 removes n1, n2
//   1  p0 removes n2 then finds; p1 finds then removes n1
//   2  p0 removes n2; p1 removes n1 and n3 (three adjacent removals)
//   3  p0 appends twice, removing each old head; p1 removes n1 then finds
// with 3 processes:
//   0  variant 0 plus p2 finding
//   1  p0, p1, p2 each remove one of n1, n2, n3
struct ListMixOptions {
  ReclaimMode mode = ReclaimMode::reclaiming;
  int processes = 2;
  int variant = 0;
};
ScenarioFactory list_mix(ListMixOptions options);
int list_mix_variants(int processes);

// Two versioned CAS cells behind a camera with batch size 2, so versions are
// deprecated and reclaimed during the run.
//
// variants with 2 processes:
//   0  p0 updates both cells; p1 takes a snapshot of both
//   1  p0 and p1 race on cell 0, p1 then takes a snapshot
//   2  p0 snapshots twice; p1 updates cell 0 three times
// with 3 processes:
//   0  variant 0 plus p2 reading and updating cell 1
struct SnapshotMixOptions {
  ReclaimMode mode = ReclaimMode::reclaiming;
  int processes = 2;
  int variant = 0;
};
ScenarioFactory snapshot_mix(SnapshotMixOptions options);
int snapshot_mix_variants(int processes);

// Range tracker with batch size 2 and a shared timestamp source.
//   p0 announces, deprecates twice, unannounces
//   p1 advances the source and deprecates twice
//   p2 (3 processes) announces after an advance and deprecates once
struct TrackerMixOptions {
  int processes = 2;
};
ScenarioFactory tracker_mix(TrackerMixOptions options);

// Named lookup for the command-line tool: list, snapshot, tracker.
ScenarioFactory scenario_by_name(const std::string& name, int processes, int variant,
                                 ReclaimMode mode);

}  // namespace mvgc::verify
