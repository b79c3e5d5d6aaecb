#include "mvgc/range_tracker.hpp"

#include <algorithm>
#include <bit>

#include <boost/lockfree/queue.hpp>

#include "mvgc/probe.hpp"

namespace mvgc {

using probe::Field;

IntersectResult intersect(std::span<const Range> merged, std::span<const Timestamp> announcements) {
  IntersectResult out;
  std::size_t i = 0;
  for (const Range& r : merged) {
    while (i < announcements.size() && announcements[i] < r.high) ++i;
    // announcements[i-1] is the largest announcement below high.
    if (i == 0 || announcements[i - 1] < r.low) {
      out.redundant.push_back(r.payload);
    } else {
      out.needed.push_back(r);
    }
  }
  return out;
}

Pool merge(Pool a, Pool b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  Pool out;
  out.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out),
             [](const Range& x, const Range& y) { return x.high < y.high; });
  return out;
}

std::pair<Pool, Pool> split(Pool pool) {
  auto mid = pool.begin() + static_cast<std::ptrdiff_t>(pool.size() / 2);
  Pool second(std::make_move_iterator(mid), std::make_move_iterator(pool.end()));
  pool.erase(mid, pool.end());
  return {std::move(pool), std::move(second)};
}

std::size_t default_batch_size(std::size_t num_processes) noexcept {
  std::size_t log2_ceil = num_processes <= 1 ? 0 : std::bit_width(num_processes - 1);
  return std::max<std::size_t>(2, num_processes * log2_ceil);
}

struct RangeTracker::Queue {
  boost::lockfree::queue<Pool*> q{64};

  ~Queue() {
    Pool* p = nullptr;
    while (q.pop(p)) delete p;
  }
};

RangeTracker::ProcessHandle& RangeTracker::ProcessHandle::operator=(ProcessHandle&& other) noexcept {
  if (this != &other) {
    if (tracker_ != nullptr) tracker_->release_slot(slot_);
    tracker_ = std::exchange(other.tracker_, nullptr);
    slot_ = other.slot_;
  }
  return *this;
}

RangeTracker::ProcessHandle::~ProcessHandle() {
  if (tracker_ != nullptr) tracker_->release_slot(slot_);
}

RangeTracker::RangeTracker(TrackerConfig config)
    : num_processes_(config.num_processes),
      batch_size_(config.batch_size != 0 ? config.batch_size
                                         : default_batch_size(config.num_processes)),
      procs_(std::make_unique<ProcessState[]>(config.num_processes)),
      queue_(std::make_unique<Queue>()) {
  MVGC_EXPECT(num_processes_ >= 1);
}

RangeTracker::~RangeTracker() = default;

RangeTracker::ProcessHandle RangeTracker::register_process() {
  for (std::size_t i = 0; i < num_processes_; ++i) {
    bool expected = false;
    if (procs_[i].in_use.compare_exchange_strong(expected, true)) return {this, i};
  }
  throw CapacityError("range tracker: all " + std::to_string(num_processes_) +
                      " process slots are registered");
}

void RangeTracker::release_slot(std::size_t slot) noexcept {
  // The local pool stays with the slot for the next registrant.
  procs_[slot].announcement.store(kEmpty);
  procs_[slot].in_use.store(false);
}

Timestamp RangeTracker::announce(ProcessHandle& handle, const std::atomic<Timestamp>& source) {
  MVGC_EXPECT(handle.tracker_ == this);
  auto& slot = procs_[handle.slot_].announcement;
  MVGC_EXPECT(slot.load() == kEmpty);  // announce and unannounce must alternate
  auto slot_id = static_cast<std::uint64_t>(handle.slot_);
  // Lock-free single-writer copy: the slot holds v at the moment the second
  // read confirms the source still equals v.
  for (;;) {
    Timestamp v = source.load();
    probe::step_read(Field::source, 0, v);
    slot.store(v);
    probe::step_write(Field::announcement, slot_id, v);
    Timestamp again = source.load();
    probe::step_read(Field::source, 0, again);
    if (again == v) return v;
  }
}

void RangeTracker::unannounce(ProcessHandle& handle) {
  MVGC_EXPECT(handle.tracker_ == this);
  auto& slot = procs_[handle.slot_].announcement;
  MVGC_EXPECT(slot.load() != kEmpty);
  slot.store(kEmpty);
  probe::step_write(Field::announcement, static_cast<std::uint64_t>(handle.slot_), kEmpty);
}

std::vector<Timestamp> RangeTracker::sort_announcements() const {
  std::vector<Timestamp> result;
  result.reserve(num_processes_);
  for (std::size_t i = 0; i < num_processes_; ++i) {
    Timestamp v = procs_[i].announcement.load();
    probe::step_read(Field::announcement, static_cast<std::uint64_t>(i), v);
    if (v != kEmpty) result.push_back(v);
  }
  std::sort(result.begin(), result.end());
  return result;
}

Pool RangeTracker::dequeue_pool() {
  Pool* p = nullptr;
  bool ok = queue_->q.pop(p);
  probe::step_read(Field::queue, 0, ok ? static_cast<std::int64_t>(p->size()) : -1);
  if (!ok) return {};
  Pool out = std::move(*p);
  delete p;
  return out;
}

void RangeTracker::enqueue_pool(Pool pool) {
  auto size = static_cast<std::int64_t>(pool.size());
  auto* p = new Pool(std::move(pool));
  MVGC_ASSERT(queue_->q.push(p));
  probe::step_write(Field::queue, 0, size);
}

std::vector<Payload> RangeTracker::deprecate(ProcessHandle& handle, Payload payload, Timestamp low,
                                             Timestamp high) {
  MVGC_EXPECT(handle.tracker_ == this);
  MVGC_EXPECT(low <= high);
  ProcessState& me = procs_[handle.slot_];
  MVGC_EXPECT(me.last_high == kEmpty || me.last_high <= high);  // highs are non-decreasing
  me.last_high = high;
  me.deprecated.store(me.deprecated.load(std::memory_order_relaxed) + 1,
                      std::memory_order_relaxed);

  me.local_pool.push_back({payload, low, high});
  if (me.local_pool.size() != batch_size_) return {};

  Pool first = dequeue_pool();
  Pool second = dequeue_pool();
  Pool merged = merge(std::move(first), std::move(second));
  std::vector<Timestamp> announcements = sort_announcements();
  IntersectResult parts = intersect(merged, announcements);

  const std::size_t b = batch_size_;
  if (parts.needed.size() > 2 * b) {
    auto [needed1, needed2] = split(std::move(parts.needed));
    enqueue_pool(std::move(needed1));
    enqueue_pool(std::move(needed2));
  } else if (parts.needed.size() > b) {
    enqueue_pool(std::move(parts.needed));
  } else {
    me.local_pool = merge(std::move(me.local_pool), std::move(parts.needed));
  }
  enqueue_pool(std::move(me.local_pool));
  me.local_pool = Pool{};

  auto returned = static_cast<std::uint64_t>(parts.redundant.size());
  me.returned.store(me.returned.load(std::memory_order_relaxed) + returned,
                    std::memory_order_relaxed);
  me.flushes.store(me.flushes.load(std::memory_order_relaxed) + 1, std::memory_order_relaxed);
  if (returned > me.max_returned.load(std::memory_order_relaxed)) {
    me.max_returned.store(returned, std::memory_order_relaxed);
  }
  return std::move(parts.redundant);
}

std::vector<Payload> RangeTracker::drain() {
  Pool all;
  Pool* p = nullptr;
  while (queue_->q.pop(p)) {
    all = merge(std::move(all), std::move(*p));
    delete p;
  }
  for (std::size_t i = 0; i < num_processes_; ++i) {
    all = merge(std::move(all), std::move(procs_[i].local_pool));
    procs_[i].local_pool = Pool{};
  }
  std::vector<Timestamp> announcements = sort_announcements();
  IntersectResult parts = intersect(all, announcements);
  if (!parts.needed.empty()) enqueue_pool(std::move(parts.needed));
  auto& counter = procs_[0].returned;
  counter.store(counter.load() + parts.redundant.size());
  return std::move(parts.redundant);
}

std::vector<Range> RangeTracker::held_ranges() const {
  std::vector<Range> out;
  std::vector<Pool*> popped;
  Pool* p = nullptr;
  while (queue_->q.pop(p)) popped.push_back(p);
  for (Pool* pool : popped) {
    out.insert(out.end(), pool->begin(), pool->end());
    MVGC_ASSERT(queue_->q.push(pool));
  }
  for (std::size_t i = 0; i < num_processes_; ++i) {
    out.insert(out.end(), procs_[i].local_pool.begin(), procs_[i].local_pool.end());
  }
  return out;
}

Timestamp RangeTracker::announcement(std::size_t slot) const {
  return procs_[slot].announcement.load();
}

TrackerCounts RangeTracker::counts() const {
  TrackerCounts c;
  for (std::size_t i = 0; i < num_processes_; ++i) {
    c.deprecated += procs_[i].deprecated.load();
    c.returned += procs_[i].returned.load();
    c.flushes += procs_[i].flushes.load();
    c.max_returned_by_one_call = std::max(c.max_returned_by_one_call, procs_[i].max_returned.load());
  }
  return c;
}

}  // namespace mvgc
