#pragma once

// Event traces and schedules for the deterministic harness.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mvgc/probe.hpp"

namespace mvgc::verify {

// Explicit interleaving: the i-th entry names the process that takes the
// i-th step. Past the end, seed 0 runs the lowest-index unfinished process;
// any other seed picks uniformly at random from a generator seeded with it.
struct Schedule {
  std::uint64_t seed = 0;
  std::vector<int> steps;

  friend bool operator==(const Schedule&, const Schedule&) = default;
};

class ScheduleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// "seed <int>" on the first line, then one process index per line. Blank
// lines and lines starting with '#' are ignored.
Schedule parse_schedule(std::string_view text);
std::string format_schedule(const Schedule& schedule);

struct TraceEvent {
  int process = -1;  // -1 for setup and teardown on the driver
  int op = -1;       // index of the operation within the process, -1 outside one
  std::uint64_t time = 0;
  probe::Event event;

  friend bool operator==(const TraceEvent& x, const TraceEvent& y);
};

struct EventTrace {
  std::vector<TraceEvent> events;

  friend bool operator==(const EventTrace&, const EventTrace&) = default;
};

// True if the given event slot carries an object identity rather than a
// plain value, for the purpose of renaming identities.
bool object_is_identity(const probe::Event& e);
bool a_is_identity(const probe::Event& e);
bool b_is_identity(const probe::Event& e);
bool c_is_identity(const probe::Event& e);
bool d_is_identity(const probe::Event& e);

// Renames object identities in first-seen order so that replays of one
// schedule produce identical traces.
class UidNormalizer {
 public:
  std::int64_t map(std::int64_t raw);
  probe::Event apply(probe::Event e);

 private:
  std::unordered_map<std::int64_t, std::int64_t> ids_;
  std::int64_t next_ = probe::kFirstUid;
};

std::string_view kind_name(probe::Kind k);
std::string_view field_name(probe::Field f);

// One JSON object per line.
std::string trace_to_jsonl(const EventTrace& trace);

}  // namespace mvgc::verify
