#pragma once

// Reference-counted lifetime management for version-list nodes and splice
// descriptors.
//
// Objects live in type-stable blocks: a block's memory is never returned to
// the system, only recycled for another object of the same type. That makes
// "increment if non-zero, then re-validate the field" a safe way to acquire a
// counted reference from a shared field without a separate protection scheme.
//
// Destruction is deferred to a per-thread work list so that freeing a long
// chain of unlinked nodes does not recurse.

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <new>
#include <utility>
#include <vector>

#include "mvgc/probe.hpp"
#include "mvgc/types.hpp"

namespace mvgc::rc {

enum class ObjectKind : std::uint8_t { vnode = 0, descriptor = 1 };

struct LedgerSnapshot {
  std::int64_t live_vnodes = 0;
  std::int64_t live_descriptors = 0;
  std::int64_t allocated_vnodes = 0;
  std::int64_t allocated_descriptors = 0;
  std::int64_t destroyed_vnodes = 0;
  std::int64_t destroyed_descriptors = 0;
  std::int64_t high_water_vnodes = 0;
  std::int64_t high_water_descriptors = 0;
};

// Process-wide allocation accounting, split by object kind.
class AllocationLedger {
 public:
  void on_allocate(ObjectKind kind) noexcept;
  void on_destroy(ObjectKind kind) noexcept;

  LedgerSnapshot snapshot() const noexcept;

  // Restarts high-water tracking from the current live counts.
  void reset_high_water() noexcept;

 private:
  struct alignas(64) Counters {
    std::atomic<std::int64_t> allocated{0};
    std::atomic<std::int64_t> destroyed{0};
    std::atomic<std::int64_t> high_water{0};
  };
  Counters counters_[2];
};

AllocationLedger& ledger() noexcept;

// Per-thread counters used to check that reference-count work stays
// proportional to the number of counted-field updates.
struct RcStats {
  std::uint64_t field_updates = 0;       // successful stores and CASes on counted fields
  std::uint64_t cascade_decrements = 0;  // decrements issued while destroying an object
  std::uint64_t destroyed = 0;
};

RcStats& thread_stats() noexcept;

inline constexpr std::uint32_t kAliveCanary = 0xA11C0DE5u;
inline constexpr std::uint32_t kDeadCanary = 0xDEADBEEFu;

template <class T>
struct Block {
  std::atomic<std::int64_t> refs{0};
  std::atomic<std::uint32_t> canary{kDeadCanary};
  std::uint64_t uid = 0;
  alignas(T) std::byte storage[sizeof(T)];

  T* object() noexcept { return std::launder(reinterpret_cast<T*>(storage)); }
  const T* object() const noexcept {
    return std::launder(reinterpret_cast<const T*>(storage));
  }
};

// Sentinel encodings shared by all counted pointer types. They never refer to
// memory and are never counted.
inline constexpr std::uintptr_t kTopBits = 1;
inline constexpr std::uintptr_t kFrozenBits = 2;

template <class T>
inline bool is_sentinel(const Block<T>* p) noexcept {
  auto bits = reinterpret_cast<std::uintptr_t>(p);
  return bits != 0 && bits < 16;
}

template <class T>
inline bool is_object(const Block<T>* p) noexcept {
  return reinterpret_cast<std::uintptr_t>(p) >= 16;
}

template <class T>
inline std::int64_t uid_of(const Block<T>* p) noexcept {
  if (p == nullptr) return probe::kNone;
  if (is_sentinel(p)) return static_cast<std::int64_t>(reinterpret_cast<std::uintptr_t>(p));
  return static_cast<std::int64_t>(p->uid);
}

namespace detail {

std::uint64_t next_uid() noexcept;

// Fixed-size, type-stable block allocator with per-thread caches.
template <class T>
class BlockPool {
 public:
  static Block<T>* allocate() {
    auto& cache = local();
    if (cache.free.empty()) refill(cache);
    Block<T>* b = cache.free.back();
    cache.free.pop_back();
    return b;
  }

  static void deallocate(Block<T>* b) {
    auto& cache = local();
    cache.free.push_back(b);
    if (cache.free.size() > kCacheHigh) donate(cache, kCacheHigh / 2);
  }

 private:
  static constexpr std::size_t kChunk = 1024;
  static constexpr std::size_t kCacheHigh = 4096;

  struct Global {
    std::mutex mu;
    std::vector<Block<T>*> free;
    std::vector<std::unique_ptr<Block<T>[]>> chunks;
  };

  struct Cache {
    std::vector<Block<T>*> free;
    ~Cache() { donate(*this, free.size()); }
  };

  static Global& global() {
    // Intentionally leaked: blocks must outlive every static that may still
    // release a reference during shutdown.
    static Global* g = new Global;
    return *g;
  }

  static Cache& local() {
    thread_local Cache cache;
    return cache;
  }

  static void refill(Cache& cache) {
    auto& g = global();
    std::lock_guard lock(g.mu);
    if (g.free.empty()) {
      auto chunk = std::make_unique<Block<T>[]>(kChunk);
      for (std::size_t i = 0; i < kChunk; ++i) cache.free.push_back(&chunk[i]);
      g.chunks.push_back(std::move(chunk));
      return;
    }
    std::size_t take = std::min<std::size_t>(g.free.size(), kChunk);
    cache.free.insert(cache.free.end(), g.free.end() - static_cast<std::ptrdiff_t>(take),
                      g.free.end());
    g.free.resize(g.free.size() - take);
  }

  static void donate(Cache& cache, std::size_t count) {
    if (count == 0) return;
    auto& g = global();
    std::lock_guard lock(g.mu);
    g.free.insert(g.free.end(), cache.free.end() - static_cast<std::ptrdiff_t>(count),
                  cache.free.end());
    cache.free.resize(cache.free.size() - count);
  }
};

// Deferred destruction list for the calling thread.
struct Reaper {
  std::vector<std::pair<void*, void (*)(void*)>> pending;
  bool draining = false;
};

Reaper& reaper() noexcept;

template <class T>
void destroy_block(void* raw) {
  auto* b = static_cast<Block<T>*>(raw);
  b->object()->~T();
  b->canary.store(kDeadCanary);
  ledger().on_destroy(T::kObjectKind);
  ++thread_stats().destroyed;
  BlockPool<T>::deallocate(b);
}

inline void run_reaper(Reaper& r) {
  r.draining = true;
  while (!r.pending.empty()) {
    auto [obj, fn] = r.pending.back();
    r.pending.pop_back();
    fn(obj);
  }
  r.draining = false;
}

template <class T>
void add_ref(Block<T>* b) noexcept {
  [[maybe_unused]] auto before = b->refs.fetch_add(1);
  MVGC_ASSERT(before > 0);
}

// Increment unless the count already reached zero.
template <class T>
bool try_add_ref(Block<T>* b) noexcept {
  auto cur = b->refs.load();
  while (cur > 0) {
    if (b->refs.compare_exchange_weak(cur, cur + 1)) return true;
  }
  return false;
}

template <class T>
void release(Block<T>* b) {
  auto& r = reaper();
  if (r.draining) ++thread_stats().cascade_decrements;
  auto before = b->refs.fetch_sub(1);
  MVGC_EXPECT(before > 0);  // releasing a reference that was never held
  if (before != 1) return;
  r.pending.emplace_back(b, &destroy_block<T>);
  if (!r.draining) run_reaper(r);
}

}  // namespace detail

// A counted reference held in local memory.
template <class T>
class CountedPtr {
 public:
  CountedPtr() = default;
  CountedPtr(std::nullptr_t) {}

  CountedPtr(const CountedPtr& other) : p_(other.p_) {
    if (rc::is_object(p_)) detail::add_ref(p_);
  }
  CountedPtr(CountedPtr&& other) noexcept : p_(std::exchange(other.p_, nullptr)) {}

  CountedPtr& operator=(const CountedPtr& other) {
    if (this != &other) {
      CountedPtr tmp(other);
      swap(tmp);
    }
    return *this;
  }
  CountedPtr& operator=(CountedPtr&& other) noexcept {
    if (this != &other) {
      CountedPtr tmp(std::move(other));
      swap(tmp);
    }
    return *this;
  }

  ~CountedPtr() { reset(); }

  // Takes over one reference the caller already owns.
  static CountedPtr adopt(Block<T>* b) noexcept {
    CountedPtr out;
    out.p_ = b;
    return out;
  }

  // Acquires a new reference to a block whose count is known to be positive.
  static CountedPtr share(Block<T>* b) noexcept {
    if (is_object(b)) detail::add_ref(b);
    return adopt(b);
  }

  static CountedPtr sentinel(std::uintptr_t bits) noexcept {
    return adopt(reinterpret_cast<Block<T>*>(bits));
  }

  void reset() {
    if (rc::is_object(p_)) detail::release(p_);
    p_ = nullptr;
  }

  // Gives up ownership without decrementing; the caller now owns the reference.
  Block<T>* detach() noexcept { return std::exchange(p_, nullptr); }

  void swap(CountedPtr& other) noexcept { std::swap(p_, other.p_); }

  Block<T>* block() const noexcept { return p_; }
  bool is_null() const noexcept { return p_ == nullptr; }
  bool is_object() const noexcept { return rc::is_object(p_); }
  bool is(std::uintptr_t sentinel_bits) const noexcept {
    return reinterpret_cast<std::uintptr_t>(p_) == sentinel_bits;
  }
  explicit operator bool() const noexcept { return is_object(); }

  std::int64_t uid() const noexcept { return uid_of(p_); }

  T* get() const noexcept {
    if (!rc::is_object(p_)) return nullptr;
    MVGC_ASSERT(p_->canary.load(std::memory_order_relaxed) == kAliveCanary);
    return p_->object();
  }
  T* operator->() const noexcept {
    MVGC_ASSERT(rc::is_object(p_));
    return get();
  }
  T& operator*() const noexcept { return *operator->(); }

  std::int64_t use_count() const noexcept { return rc::is_object(p_) ? p_->refs.load() : 0; }

  friend bool operator==(const CountedPtr& a, const CountedPtr& b) noexcept {
    return a.p_ == b.p_;
  }
  friend bool operator==(const CountedPtr& a, const Block<T>* b) noexcept { return a.p_ == b; }

 private:
  Block<T>* p_ = nullptr;
};

template <class T, class... Args>
CountedPtr<T> make_counted(Args&&... args) {
  Block<T>* b = detail::BlockPool<T>::allocate();
  ::new (static_cast<void*>(b->storage)) T(std::forward<Args>(args)...);
  b->uid = detail::next_uid();
  b->canary.store(kAliveCanary);
  b->refs.store(1);
  ledger().on_allocate(T::kObjectKind);
  return CountedPtr<T>::adopt(b);
}

// A counted reference stored in shared memory; supports concurrent load,
// store and compare-and-swap.
template <class T>
class AtomicCountedPtr {
 public:
  AtomicCountedPtr() = default;
  AtomicCountedPtr(const AtomicCountedPtr&) = delete;
  AtomicCountedPtr& operator=(const AtomicCountedPtr&) = delete;
  ~AtomicCountedPtr() {
    Block<T>* p = ptr_.load();
    if (is_object(p)) detail::release(p);
  }

  // Acquire: returns a counted reference to the current target.
  CountedPtr<T> load() const {
    for (;;) {
      Block<T>* p = ptr_.load();
      if (!is_object(p)) return CountedPtr<T>::adopt(p);
      // A zero count means the field no longer holds p; re-read.
      if (!detail::try_add_ref(p)) continue;
      if (ptr_.load() == p) return CountedPtr<T>::adopt(p);
      detail::release(p);
    }
  }

  // Identity of the current target without acquiring it. Safe for equality
  // tests against a reference the caller holds, or during quiescence.
  Block<T>* peek() const noexcept { return ptr_.load(); }

  void store(CountedPtr<T> desired) {
    Block<T>* old = ptr_.exchange(desired.detach());
    ++thread_stats().field_updates;
    if (is_object(old)) detail::release(old);
  }

  bool compare_exchange(Block<T>* expected, const CountedPtr<T>& desired) {
    Block<T>* want = desired.block();
    if (is_object(want)) detail::add_ref(want);
    Block<T>* exp = expected;
    if (ptr_.compare_exchange_strong(exp, want)) {
      ++thread_stats().field_updates;
      if (is_object(expected)) detail::release(expected);
      return true;
    }
    if (is_object(want)) detail::release(want);
    return false;
  }

 private:
  std::atomic<Block<T>*> ptr_{nullptr};
};

// Free-function forms of the handle operations.
template <class T>
CountedPtr<T> acquire(const AtomicCountedPtr<T>& field) {
  return field.load();
}

template <class T>
bool counted_field_cas(AtomicCountedPtr<T>& field, const CountedPtr<T>& expected,
                       const CountedPtr<T>& desired) {
  return field.compare_exchange(expected.block(), desired);
}

template <class T>
void release(CountedPtr<T>& handle) {
  MVGC_EXPECT(handle.is_object());  // releasing an empty or already-released handle
  handle.reset();
}

}  // namespace mvgc::rc
