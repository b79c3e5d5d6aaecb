#include "mvgc/counted.hpp"

namespace mvgc::rc {

void AllocationLedger::on_allocate(ObjectKind kind) noexcept {
  auto& c = counters_[static_cast<int>(kind)];
  auto allocated = c.allocated.fetch_add(1) + 1;
  auto live = allocated - c.destroyed.load();
  auto hw = c.high_water.load();
  while (live > hw && !c.high_water.compare_exchange_weak(hw, live)) {
  }
}

void AllocationLedger::on_destroy(ObjectKind kind) noexcept {
  counters_[static_cast<int>(kind)].destroyed.fetch_add(1);
}

LedgerSnapshot AllocationLedger::snapshot() const noexcept {
  LedgerSnapshot s;
  const auto& v = counters_[0];
  const auto& d = counters_[1];
  // Read destroyed first so live never reads negative under concurrency.
  s.destroyed_vnodes = v.destroyed.load();
  s.allocated_vnodes = v.allocated.load();
  s.destroyed_descriptors = d.destroyed.load();
  s.allocated_descriptors = d.allocated.load();
  s.live_vnodes = s.allocated_vnodes - s.destroyed_vnodes;
  s.live_descriptors = s.allocated_descriptors - s.destroyed_descriptors;
  s.high_water_vnodes = v.high_water.load();
  s.high_water_descriptors = d.high_water.load();
  return s;
}

void AllocationLedger::reset_high_water() noexcept {
  for (auto& c : counters_) c.high_water.store(c.allocated.load() - c.destroyed.load());
}

AllocationLedger& ledger() noexcept {
  static AllocationLedger* instance = new AllocationLedger;
  return *instance;
}

RcStats& thread_stats() noexcept {
  thread_local RcStats stats;
  return stats;
}

namespace detail {

std::uint64_t next_uid() noexcept {
  static std::atomic<std::uint64_t> counter{static_cast<std::uint64_t>(probe::kFirstUid)};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

Reaper& reaper() noexcept {
  thread_local Reaper r;
  return r;
}

}  // namespace detail

}  // namespace mvgc::rc
