#pragma once

// Randomized runs on real threads. Checks that need a consistent view run at
// pause points or after the run, from per-thread logs.

#include <cstdint>
#include <string>
#include <vector>

#include "mvgc/types.hpp"
#include "mvgc/verify/space.hpp"

namespace mvgc::verify {

// ---- range tracker ----

struct TrackerStressOptions {
  int threads = 8;
  std::uint64_t deprecates = 1'000'000;  // total over all threads
  std::size_t batch_size = 0;            // 0: default for the thread count
  std::uint64_t seed = 1;
  int announce_percent = 5;  // chance per iteration of announcing when idle
  int hold = 16;             // iterations an announcement stays active
  int extra_flush_phases = 3;
};

struct TrackerStressResult {
  std::uint64_t deprecates = 0;
  std::uint64_t returned = 0;
  std::uint64_t announcements = 0;
  std::uint64_t duplicate_returns = 0;
  // Returns whose interval held an announcement that was active for the
  // whole deprecate call, or that started after it.
  std::uint64_t covered_returns = 0;
  std::uint64_t max_returned_per_call = 0;
  std::uint64_t batch_size = 0;
  // Payloads deprecated before the extra flush phases and still held after
  // them, with no announcement active.
  std::uint64_t outstanding_after_extra = 0;
  std::vector<std::string> errors;

  bool ok() const { return errors.empty(); }
};

TrackerStressResult tracker_stress(const TrackerStressOptions& options);

// One announcement pinned for the whole run; the first `needed` deprecated
// intervals contain it and no others do.
struct PlateauOptions {
  int threads = 8;
  std::uint64_t needed = 1000;
  std::uint64_t deprecates = 400'000;
  std::size_t batch_size = 0;
  std::uint64_t seed = 1;
  std::uint64_t sample_every = 1000;  // deprecates between samples, per thread
};

struct PlateauResult {
  std::uint64_t H = 0;
  int P = 0;
  std::uint64_t max_outstanding = 0;
  std::uint64_t final_outstanding = 0;
  std::uint64_t samples = 0;
  // (max_outstanding - 2H) / (P^2 ceil(log2 P)), floored at 0.
  double c = 0;
};

PlateauResult tracker_plateau(const PlateauOptions& options);

// ---- version list ----

struct ListStressOptions {
  int threads = 8;
  std::uint64_t appends = 1'000'000;  // total over all threads
  int lists_per_thread = 1;
  ReclaimMode mode = ReclaimMode::reclaiming;
  std::uint64_t seed = 1;
  int max_burst = 8;  // appends in a row before removing as many nodes
  // Park thread 0 inside a remove (after marking, at its first splice) until
  // the run ends.
  bool park_one = false;
  std::uint64_t park_after_removes = 1000;
  std::uint64_t sample_every = 50'000;  // appends between space samples; 0: none
};

struct ListStressResult {
  std::uint64_t appends = 0;
  std::uint64_t removes = 0;
  std::uint64_t remove_rec_calls = 0;
  std::int64_t max_depth_excess = 0;  // max over removes of depth - priority
  std::uint64_t max_depth = 0;
  bool parked = false;
  std::vector<SpaceMetrics> samples;
  double max_space_c = 0;  // max over samples of (lr - 2(L-R)) / (P ceil(log2 L_max))
  SpaceMetrics final_metrics;
  std::vector<std::string> errors;

  bool ok() const { return errors.empty(); }
};

ListStressResult list_stress(const ListStressOptions& options);

// ---- snapshot store ----

struct SnapshotStressOptions {
  int threads = 8;
  int cells = 16;
  std::uint64_t ops = 400'000;  // total over all threads
  int snapshot_percent = 10;
  ReclaimMode mode = ReclaimMode::reclaiming;
  std::uint64_t seed = 1;
  int quiescent_checks = 8;
};

struct SnapshotStressResult {
  std::uint64_t updates = 0;
  std::uint64_t successful_updates = 0;
  std::uint64_t snapshots = 0;
  std::uint64_t finds = 0;
  std::uint64_t forward_steps = 0;
  std::uint64_t upward_steps = 0;
  std::uint64_t quiescent_checks = 0;
  std::vector<std::string> errors;

  bool ok() const { return errors.empty(); }
};

SnapshotStressResult snapshot_stress(const SnapshotStressOptions& options);

}  // namespace mvgc::verify
