#pragma once

// Range tracker: holds deprecated objects with their half-open validity
// intervals [low, high) and a multiset of announced timestamps, and hands back
// deprecated objects whose interval contains no active announcement.
//
// Each process buffers deprecated ranges in a local pool. When the pool
// reaches B entries the deprecating process runs a flush phase: it dequeues
// two pools from a shared queue, merges them, intersects the result with the
// sorted announcements, returns the redundant objects and re-enqueues the
// rest together with its local pool.

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mvgc/types.hpp"

namespace mvgc {

struct Range {
  Payload payload;
  Timestamp low = 0;
  Timestamp high = 0;

  friend bool operator==(const Range&, const Range&) = default;
};

// Sorted by high, non-decreasing.
using Pool = std::vector<Range>;

struct IntersectResult {
  std::vector<Payload> redundant;
  Pool needed;
};

// Partitions a pool sorted by high against ascending announcements: a range is
// needed iff some announcement lies in [low, high). Order is preserved.
IntersectResult intersect(std::span<const Range> merged, std::span<const Timestamp> announcements);

// Sorted union of two pools sorted by high.
Pool merge(Pool a, Pool b);

// Two halves, first of size n/2, preserving order.
std::pair<Pool, Pool> split(Pool pool);

// B = max(2, P * ceil(log2 P)).
std::size_t default_batch_size(std::size_t num_processes) noexcept;

struct TrackerConfig {
  std::size_t num_processes = 1;
  std::size_t batch_size = 0;  // 0 selects default_batch_size(num_processes)
};

class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrackerCounts {
  std::uint64_t deprecated = 0;
  std::uint64_t returned = 0;
  std::uint64_t flushes = 0;
  std::uint64_t max_returned_by_one_call = 0;

  std::uint64_t outstanding() const noexcept { return deprecated - returned; }
};

class RangeTracker {
 public:
  // A registered process. Owns one announcement slot and one local pool.
  // Movable between threads but used by one thread at a time.
  class ProcessHandle {
   public:
    ProcessHandle() = default;
    ProcessHandle(ProcessHandle&& other) noexcept
        : tracker_(std::exchange(other.tracker_, nullptr)), slot_(other.slot_) {}
    ProcessHandle& operator=(ProcessHandle&& other) noexcept;
    ProcessHandle(const ProcessHandle&) = delete;
    ProcessHandle& operator=(const ProcessHandle&) = delete;
    ~ProcessHandle();

    std::size_t slot() const noexcept { return slot_; }
    bool valid() const noexcept { return tracker_ != nullptr; }

   private:
    friend class RangeTracker;
    ProcessHandle(RangeTracker* tracker, std::size_t slot) : tracker_(tracker), slot_(slot) {}
    RangeTracker* tracker_ = nullptr;
    std::size_t slot_ = 0;
  };

  explicit RangeTracker(TrackerConfig config);
  ~RangeTracker();
  RangeTracker(const RangeTracker&) = delete;
  RangeTracker& operator=(const RangeTracker&) = delete;

  // Throws CapacityError when all P slots are taken.
  ProcessHandle register_process();

  // Copies the current value of source into the caller's slot and returns it.
  Timestamp announce(ProcessHandle& handle, const std::atomic<Timestamp>& source);
  void unannounce(ProcessHandle& handle);

  // Adds (payload, low, high) and returns deprecated payloads whose
  // intervals contain no active announcement. Returns nothing unless this
  // call fills the local pool to B.
  std::vector<Payload> deprecate(ProcessHandle& handle, Payload payload, Timestamp low,
                                 Timestamp high);

  // Non-empty slot values, sorted ascending.
  std::vector<Timestamp> sort_announcements() const;

  // Removes every deprecated range from the queue and all local pools and
  // returns those not covered by an active announcement. The covered ones are
  // kept. Requires quiescence.
  std::vector<Payload> drain();

  // Every payload still held, regardless of announcements. Requires quiescence.
  std::vector<Range> held_ranges() const;

  Timestamp announcement(std::size_t slot) const;
  std::size_t num_processes() const noexcept { return num_processes_; }
  std::size_t batch_size() const noexcept { return batch_size_; }
  TrackerCounts counts() const;

 private:
  struct alignas(64) ProcessState {
    std::atomic<Timestamp> announcement{kEmpty};
    std::atomic<bool> in_use{false};
    Pool local_pool;
    Timestamp last_high = kEmpty;
    // Single-writer counters, read by counts().
    std::atomic<std::uint64_t> deprecated{0};
    std::atomic<std::uint64_t> returned{0};
    std::atomic<std::uint64_t> flushes{0};
    std::atomic<std::uint64_t> max_returned{0};
  };

  struct Queue;

  void release_slot(std::size_t slot) noexcept;
  Pool dequeue_pool();
  void enqueue_pool(Pool pool);

  std::size_t num_processes_;
  std::size_t batch_size_;
  std::unique_ptr<ProcessState[]> procs_;
  std::unique_ptr<Queue> queue_;
};

}  // namespace mvgc
