#pragma once

// Snapshot layer: a Camera (global timestamp plus range tracker) and
// VersionedCAS objects built on version lists. Superseded versions go to the
// tracker with interval [old head ts, new head ts); whatever the tracker hands
// back is removed from its list and freed by reference counting.
//
// Host-structure nodes (DNode) are routed through the same tracker with a
// [birth, retire) interval so one snapshot protects both kinds of object.

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "mvgc/range_tracker.hpp"
#include "mvgc/types.hpp"
#include "mvgc/version_list.hpp"

namespace mvgc {

class Camera;
class DNode;

using ProcessHandle = RangeTracker::ProcessHandle;

struct StoreCounts {
  std::uint64_t vnodes_deprecated = 0;
  std::uint64_t vnodes_removed = 0;
  std::uint64_t dnodes_deprecated = 0;
  std::uint64_t dnodes_freed = 0;
};

class VersionedCAS {
 public:
  VersionedCAS(Value initial, Camera& camera, ReclaimMode mode = ReclaimMode::reclaiming);
  // Removes the head version. Older versions still held by the tracker are
  // released when the tracker returns them.
  ~VersionedCAS();
  VersionedCAS(const VersionedCAS&) = delete;
  VersionedCAS& operator=(const VersionedCAS&) = delete;

  Value v_read();
  bool v_cas(ProcessHandle& handle, Value expected, Value desired);

  // Value current at snapshot ts. The snapshot that produced ts must still be
  // announced by the caller.
  Value read_version(Timestamp ts, FindTrace* trace = nullptr);

  // Stamps n with the camera's current time if it has no timestamp yet.
  void init_ts(const NodeRef& n);

  VersionList& list() noexcept { return list_; }
  const VersionList& list() const noexcept { return list_; }
  Camera& camera() const noexcept { return *camera_; }

  // Detaches and removes the head. Idempotent; the object must be quiescent.
  void retire();

 private:
  VersionList list_;
  Camera* camera_;
  bool retired_ = false;
};

// A node of a host data structure whose reclamation is delayed until no
// snapshot in [birth, retire) remains announced.
class DNode {
 public:
  virtual ~DNode() = default;

  // Every VersionedCAS owned by this node. Their heads are removed before the
  // node is destroyed.
  virtual void for_each_field(const std::function<void(VersionedCAS&)>& fn) = 0;

  Timestamp birth_ts() const noexcept { return birth_ts_; }
  Timestamp retire_ts() const noexcept { return retire_ts_; }

 private:
  friend class Camera;
  Timestamp birth_ts_ = kTbd;
  Timestamp retire_ts_ = kTbd;
  bool freed_ = false;
};

class Camera {
 public:
  explicit Camera(TrackerConfig config);
  // Drains the tracker and reclaims everything it still holds. All process
  // handles must be gone.
  ~Camera();
  Camera(const Camera&) = delete;
  Camera& operator=(const Camera&) = delete;

  ProcessHandle register_process() { return tracker_.register_process(); }

  Timestamp take_snapshot(ProcessHandle& handle);
  void unreserve(ProcessHandle& handle);

  Timestamp now() const;

  void dnode_birth(DNode& node);
  void dnode_retire(DNode& node);
  // Hands a retired node to the tracker. Returns the number of host nodes
  // reclaimed by this call (possibly including older ones).
  std::size_t dnode_free(ProcessHandle& handle, DNode* node);

  // Reclaims everything the tracker holds that no announcement covers.
  // Requires quiescence.
  std::size_t drain();

  RangeTracker& tracker() noexcept { return tracker_; }
  const RangeTracker& tracker() const noexcept { return tracker_; }
  const std::atomic<Timestamp>& timestamp_source() const noexcept { return timestamp_; }
  StoreCounts counts() const;

 private:
  friend class VersionedCAS;

  // Takes ownership of one reference to old_head.
  void deprecate_version(ProcessHandle& handle, NodeRef old_head, Timestamp low, Timestamp high);
  std::size_t reclaim(const std::vector<Payload>& payloads);

  std::atomic<Timestamp> timestamp_{0};
  RangeTracker tracker_;
  std::atomic<std::uint64_t> vnodes_deprecated_{0};
  std::atomic<std::uint64_t> vnodes_removed_{0};
  std::atomic<std::uint64_t> dnodes_deprecated_{0};
  std::atomic<std::uint64_t> dnodes_freed_{0};
};

// Reference host: a fixed keyspace of slots, each a VersionedCAS whose value
// is the address of the DNode currently bound to the key (0 when absent). A
// DNode carries the key's value in its own VersionedCAS. Each key must be
// written by one handle at a time. erase() stands in for the host's own
// reclamation and hands the DNode to the camera at once, so get() on a key
// is only safe from the thread that may erase it; other threads read through
// a snapshot.
class VersionedMap {
 public:
  using Key = std::uint32_t;

  VersionedMap(Camera& camera, std::size_t num_keys, ReclaimMode mode = ReclaimMode::reclaiming);
  // Frees live DNodes directly; the camera must be quiescent.
  ~VersionedMap();
  VersionedMap(const VersionedMap&) = delete;
  VersionedMap& operator=(const VersionedMap&) = delete;

  std::optional<Value> get(Key key);
  void put(ProcessHandle& handle, Key key, Value value);
  bool erase(ProcessHandle& handle, Key key);

  // Value of key at snapshot ts; same precondition as read_version.
  std::optional<Value> get_at(Key key, Timestamp ts, FindTrace* trace = nullptr);

  std::size_t size() const noexcept { return slots_.size(); }
  Camera& camera() const noexcept { return *camera_; }

  // Every version list in the map: one per slot plus one per live DNode.
  // Requires quiescence.
  std::vector<const VersionList*> lists() const;

 private:
  class Entry;

  Camera* camera_;
  ReclaimMode mode_;
  std::vector<std::unique_ptr<VersionedCAS>> slots_;
};

// A snapshot query. Takes a snapshot on construction, releases it on
// destruction, and reads each key at most once.
class SnapshotView {
 public:
  SnapshotView(VersionedMap& map, ProcessHandle& handle);
  ~SnapshotView();
  SnapshotView(const SnapshotView&) = delete;
  SnapshotView& operator=(const SnapshotView&) = delete;

  std::optional<Value> get(VersionedMap::Key key);
  Timestamp timestamp() const noexcept { return ts_; }
  std::size_t reads() const noexcept { return reads_; }

 private:
  VersionedMap* map_;
  ProcessHandle* handle_;
  Timestamp ts_;
  std::size_t reads_ = 0;
  std::unordered_map<VersionedMap::Key, std::optional<Value>> memo_;
};

}  // namespace mvgc
