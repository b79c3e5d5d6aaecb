#pragma once

// Instrumentation hooks. Every shared-memory step of the tracker, list and
// camera reports an Event to the observer installed on the calling thread.
// With no observer installed the cost is one thread-local load per step;
// building with MVGC_INSTRUMENT=0 removes the hooks entirely.

#include <cstdint>

#ifndef MVGC_INSTRUMENT
#define MVGC_INSTRUMENT 1
#endif

namespace mvgc::probe {

// Reserved identities. Real objects get uids >= kFirstUid.
inline constexpr std::int64_t kNone = 0;
inline constexpr std::int64_t kTop = 1;
inline constexpr std::int64_t kFrozen = 2;
inline constexpr std::int64_t kFirstUid = 16;

enum class Field : std::uint8_t {
  none,
  head,
  left,
  right,
  status,
  left_desc,
  right_desc,
  ts,
  announcement,
  source,  // the timestamp variable an announce copies from
  queue,
};

enum class Kind : std::uint8_t {
  // steps (yield points)
  read,   // a = value read
  write,  // b = value written
  cas,    // a = expected, b = desired, ok = success
  // marks (no yield)
  node_init,     // object = node, a = counter, b = priority, c = list, d = initial left
  descriptor,    // object = descriptor, a/b/c = A/B/C node uids
  splice_call,   // a/b/c = A/B/C node uids
  find_begin,    // object = start node, a = query timestamp
  find_step,     // object = source node, a = destination, b = 1 if via right link
  remove_rec,    // object = node, a = recursion depth
  remove_begin,  // object = node
};

struct Event {
  Kind kind = Kind::read;
  Field field = Field::none;
  std::uint64_t object = 0;
  std::int64_t a = 0;
  std::int64_t b = 0;
  std::int64_t c = 0;
  std::int64_t d = 0;
  bool ok = false;
};

constexpr bool is_step(Kind k) { return k == Kind::read || k == Kind::write || k == Kind::cas; }

class Observer {
 public:
  virtual ~Observer() = default;
  virtual void on_event(const Event& event) = 0;
};

#if MVGC_INSTRUMENT
namespace detail {
inline thread_local Observer* tls_observer = nullptr;
}

inline Observer* current() { return detail::tls_observer; }

inline void emit(const Event& event) {
  if (auto* obs = detail::tls_observer) obs->on_event(event);
}

inline bool active() { return detail::tls_observer != nullptr; }

class ScopedObserver {
 public:
  explicit ScopedObserver(Observer* obs) : previous_(detail::tls_observer) {
    detail::tls_observer = obs;
  }
  ~ScopedObserver() { detail::tls_observer = previous_; }
  ScopedObserver(const ScopedObserver&) = delete;
  ScopedObserver& operator=(const ScopedObserver&) = delete;

 private:
  Observer* previous_;
};
#else
inline Observer* current() { return nullptr; }
inline void emit(const Event&) {}
inline bool active() { return false; }
class ScopedObserver {
 public:
  explicit ScopedObserver(Observer*) {}
};
#endif

inline void step_read(Field f, std::uint64_t obj, std::int64_t value) {
  if (active()) emit({Kind::read, f, obj, value, 0, 0, 0, true});
}
inline void step_write(Field f, std::uint64_t obj, std::int64_t value) {
  if (active()) emit({Kind::write, f, obj, 0, value, 0, 0, true});
}
inline void step_cas(Field f, std::uint64_t obj, std::int64_t expected, std::int64_t desired,
                     bool ok) {
  if (active()) emit({Kind::cas, f, obj, expected, desired, 0, 0, ok});
}
inline void mark(Kind k, std::uint64_t obj, std::int64_t a = 0, std::int64_t b = 0,
                 std::int64_t c = 0, std::int64_t d = 0) {
  if (active()) emit({k, Field::none, obj, a, b, c, d, true});
}

}  // namespace mvgc::probe
