#pragma once

#include <compare>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <limits>

namespace mvgc {

using Timestamp = std::int64_t;
using Value = std::int64_t;

// Timestamp of a node that has not been stamped yet. It compares greater than
// every real timestamp, so a traversal starting at such a node moves past it.
inline constexpr Timestamp kTbd = std::numeric_limits<Timestamp>::max();

// Announcement slot value meaning "no active announcement".
inline constexpr Timestamp kEmpty = std::numeric_limits<Timestamp>::min();

// Opaque identity of a deprecated object handed to the range tracker.
struct Payload {
  std::uint64_t bits = 0;

  friend constexpr auto operator<=>(Payload, Payload) = default;
};

enum class ReclaimMode : std::uint8_t {
  baseline,    // list algorithm exactly as published; no TOP clearing
  reclaiming,  // TOP clearing in splice and the right-redirect in find
};

[[noreturn]] inline void contract_failure(const char* expr, const char* file, int line) {
  std::fprintf(stderr, "mvgc: contract violated: %s (%s:%d)\n", expr, file, line);
  std::abort();
}

}  // namespace mvgc

// Precondition checks for the caller-side assumptions the algorithms depend on.
// Enabled unless MVGC_NO_CONTRACTS is defined.
#ifndef MVGC_NO_CONTRACTS
#define MVGC_EXPECT(cond) \
  ((cond) ? static_cast<void>(0) : ::mvgc::contract_failure(#cond, __FILE__, __LINE__))
#else
#define MVGC_EXPECT(cond) static_cast<void>(0)
#endif

// Internal invariants that must hold regardless of caller behavior.
#define MVGC_ASSERT(cond) \
  ((cond) ? static_cast<void>(0) : ::mvgc::contract_failure(#cond, __FILE__, __LINE__))
