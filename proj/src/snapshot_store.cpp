#include "mvgc/snapshot_store.hpp"

#include "mvgc/probe.hpp"

namespace mvgc {

using probe::Field;

namespace {

constexpr std::uint64_t kDNodeTag = 1;

Payload vnode_payload(NodeBlock* b) {
  auto bits = reinterpret_cast<std::uint64_t>(b);
  MVGC_ASSERT((bits & kDNodeTag) == 0);
  return {bits};
}

Payload dnode_payload(DNode* d) {
  auto bits = reinterpret_cast<std::uint64_t>(d);
  MVGC_ASSERT((bits & kDNodeTag) == 0);
  return {bits | kDNodeTag};
}

}  // namespace

// ---- Camera ----

Camera::Camera(TrackerConfig config) : tracker_(config) {}

Camera::~Camera() {
  drain();
  MVGC_EXPECT(tracker_.held_ranges().empty());  // a snapshot was still announced
}

Timestamp Camera::take_snapshot(ProcessHandle& handle) {
  Timestamp ts = tracker_.announce(handle, timestamp_);
  Timestamp expected = ts;
  bool ok = timestamp_.compare_exchange_strong(expected, ts + 1);
  probe::step_cas(Field::source, 0, ts, ts + 1, ok);
  return ts;
}

void Camera::unreserve(ProcessHandle& handle) { tracker_.unannounce(handle); }

Timestamp Camera::now() const {
  Timestamp t = timestamp_.load();
  probe::step_read(Field::source, 0, t);
  return t;
}

void Camera::dnode_birth(DNode& node) {
  MVGC_EXPECT(node.birth_ts_ == kTbd);
  node.birth_ts_ = now();
}

void Camera::dnode_retire(DNode& node) {
  MVGC_EXPECT(node.birth_ts_ != kTbd);
  MVGC_EXPECT(node.retire_ts_ == kTbd);
  node.retire_ts_ = now();
}

std::size_t Camera::dnode_free(ProcessHandle& handle, DNode* node) {
  MVGC_EXPECT(node != nullptr);
  MVGC_EXPECT(node->retire_ts_ != kTbd);  // freeing before retiring
  MVGC_EXPECT(!node->freed_);
  node->freed_ = true;
  dnodes_deprecated_.fetch_add(1, std::memory_order_relaxed);
  auto before = dnodes_freed_.load();
  reclaim(tracker_.deprecate(handle, dnode_payload(node), node->birth_ts_, node->retire_ts_));
  return static_cast<std::size_t>(dnodes_freed_.load() - before);
}

void Camera::deprecate_version(ProcessHandle& handle, NodeRef old_head, Timestamp low,
                               Timestamp high) {
  // The tracker keeps the reference until it returns the node, so the node
  // outlives its list if the list is discarded first.
  vnodes_deprecated_.fetch_add(1, std::memory_order_relaxed);
  reclaim(tracker_.deprecate(handle, vnode_payload(old_head.detach()), low, high));
}

std::size_t Camera::reclaim(const std::vector<Payload>& payloads) {
  for (Payload p : payloads) {
    if ((p.bits & kDNodeTag) != 0) {
      auto* d = reinterpret_cast<DNode*>(p.bits & ~kDNodeTag);
      d->for_each_field([](VersionedCAS& field) { field.retire(); });
      delete d;
      dnodes_freed_.fetch_add(1, std::memory_order_relaxed);
    } else {
      NodeRef n = NodeRef::adopt(reinterpret_cast<NodeBlock*>(p.bits));
      VersionList::remove(n);
      vnodes_removed_.fetch_add(1, std::memory_order_relaxed);
    }
  }
  return payloads.size();
}

std::size_t Camera::drain() {
  std::size_t total = 0;
  for (;;) {
    std::size_t n = reclaim(tracker_.drain());
    if (n == 0) return total;
    total += n;
  }
}

StoreCounts Camera::counts() const {
  return {vnodes_deprecated_.load(), vnodes_removed_.load(), dnodes_deprecated_.load(),
          dnodes_freed_.load()};
}

// ---- VersionedCAS ----

VersionedCAS::VersionedCAS(Value initial, Camera& camera, ReclaimMode mode)
    : list_(mode), camera_(&camera) {
  NodeRef node = make_node(initial);
  MVGC_ASSERT(list_.try_append(nullptr, node));
  init_ts(node);
}

VersionedCAS::~VersionedCAS() { retire(); }

void VersionedCAS::retire() {
  if (retired_) return;
  retired_ = true;
  list_.retire();
}

void VersionedCAS::init_ts(const NodeRef& n) {
  Timestamp t = n->ts.load();
  probe::step_read(Field::ts, static_cast<std::uint64_t>(n.uid()), t);
  if (t != kTbd) return;
  Timestamp cur = camera_->now();
  Timestamp expected = kTbd;
  bool ok = n->ts.compare_exchange_strong(expected, cur);
  probe::step_cas(Field::ts, static_cast<std::uint64_t>(n.uid()), kTbd, cur, ok);
}

Value VersionedCAS::v_read() {
  NodeRef head = list_.get_head();
  init_ts(head);
  return head->value;
}

bool VersionedCAS::v_cas(ProcessHandle& handle, Value expected, Value desired) {
  NodeRef head = list_.get_head();
  init_ts(head);
  if (head->value != expected) return false;
  if (desired == expected) return true;
  NodeRef fresh = make_node(desired);
  if (list_.try_append(head, fresh)) {
    init_ts(fresh);
    Timestamp low = head->ts.load();
    Timestamp high = fresh->ts.load();
    camera_->deprecate_version(handle, std::move(head), low, high);
    return true;
  }
  fresh.reset();
  init_ts(list_.get_head());
  return false;
}

Value VersionedCAS::read_version(Timestamp ts, FindTrace* trace) {
  NodeRef head = list_.get_head();
  init_ts(head);
  NodeRef node = VersionList::find(std::move(head), ts, trace);
  MVGC_ASSERT(node.is_object());  // the first version predates every snapshot
  return node->value;
}

// ---- VersionedMap ----

class VersionedMap::Entry final : public DNode {
 public:
  Entry(Value v, Camera& camera, ReclaimMode mode) : value(v, camera, mode) {}

  void for_each_field(const std::function<void(VersionedCAS&)>& fn) override { fn(value); }

  VersionedCAS value;
};

namespace {

Value entry_bits(const void* e) { return static_cast<Value>(reinterpret_cast<std::intptr_t>(e)); }

template <class E>
E* entry_of(Value bits) {
  return reinterpret_cast<E*>(static_cast<std::intptr_t>(bits));
}

}  // namespace

VersionedMap::VersionedMap(Camera& camera, std::size_t num_keys, ReclaimMode mode)
    : camera_(&camera), mode_(mode) {
  slots_.reserve(num_keys);
  for (std::size_t i = 0; i < num_keys; ++i) {
    slots_.push_back(std::make_unique<VersionedCAS>(0, camera, mode));
  }
}

VersionedMap::~VersionedMap() {
  for (auto& slot : slots_) {
    if (Entry* e = entry_of<Entry>(slot->v_read())) delete e;
  }
}

std::optional<Value> VersionedMap::get(Key key) {
  MVGC_EXPECT(key < slots_.size());
  Entry* e = entry_of<Entry>(slots_[key]->v_read());
  if (e == nullptr) return std::nullopt;
  return e->value.v_read();
}

void VersionedMap::put(ProcessHandle& handle, Key key, Value value) {
  MVGC_EXPECT(key < slots_.size());
  VersionedCAS& slot = *slots_[key];
  if (Entry* e = entry_of<Entry>(slot.v_read())) {
    bool ok = e->value.v_cas(handle, e->value.v_read(), value);
    MVGC_EXPECT(ok);  // another writer touched this key
    return;
  }
  auto* e = new Entry(value, *camera_, mode_);
  camera_->dnode_birth(*e);
  bool ok = slot.v_cas(handle, 0, entry_bits(e));
  MVGC_EXPECT(ok);
}

bool VersionedMap::erase(ProcessHandle& handle, Key key) {
  MVGC_EXPECT(key < slots_.size());
  VersionedCAS& slot = *slots_[key];
  Value bits = slot.v_read();
  if (bits == 0) return false;
  bool ok = slot.v_cas(handle, bits, 0);
  MVGC_EXPECT(ok);
  Entry* e = entry_of<Entry>(bits);
  camera_->dnode_retire(*e);
  camera_->dnode_free(handle, e);
  return true;
}

std::optional<Value> VersionedMap::get_at(Key key, Timestamp ts, FindTrace* trace) {
  MVGC_EXPECT(key < slots_.size());
  Entry* e = entry_of<Entry>(slots_[key]->read_version(ts, trace));
  if (e == nullptr) return std::nullopt;
  return e->value.read_version(ts, trace);
}

std::vector<const VersionList*> VersionedMap::lists() const {
  std::vector<const VersionList*> out;
  for (const auto& slot : slots_) {
    out.push_back(&slot->list());
    NodeBlock* head = slot->list().head_field().peek();
    if (!rc::is_object(head)) continue;
    if (auto* e = entry_of<Entry>(head->object()->value)) out.push_back(&e->value.list());
  }
  return out;
}

// ---- SnapshotView ----

SnapshotView::SnapshotView(VersionedMap& map, ProcessHandle& handle)
    : map_(&map), handle_(&handle), ts_(map.camera().take_snapshot(handle)) {}

SnapshotView::~SnapshotView() { map_->camera().unreserve(*handle_); }

std::optional<Value> SnapshotView::get(VersionedMap::Key key) {
  if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  ++reads_;
  auto v = map_->get_at(key, ts_);
  memo_.emplace(key, v);
  return v;
}

}  // namespace mvgc
