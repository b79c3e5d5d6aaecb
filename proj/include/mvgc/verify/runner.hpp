#pragma once

// Deterministic interleaving of virtual processes. Each process runs on its
// own fiber on the calling thread and yields back to the driver after every
// instrumented shared-memory step, so a schedule fully determines the
// execution.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mvgc/verify/linearizability.hpp"
#include "mvgc/verify/trace.hpp"

namespace mvgc::verify {

class Context;

// A system under test plus the programs its processes run. A fresh instance
// is built for every execution.
class Scenario {
 public:
  virtual ~Scenario() = default;
  virtual int num_processes() const = 0;
  // Runs on the driver before any process starts.
  virtual void setup(Context&) {}
  // Program of process p; runs on p's fiber.
  virtual void run(int p, Context& ctx) = 0;
  // Runs on the driver once every process finished. Returns a description of
  // any end-state check that failed.
  virtual std::optional<std::string> finish(Context&) { return std::nullopt; }
  // Sequential specification used for the linearizability check; null skips it.
  virtual std::unique_ptr<Oracle> oracle() const { return nullptr; }
};

using ScenarioFactory = std::function<std::unique_ptr<Scenario>()>;

// Records operation boundaries into the history of the current execution.
class Context {
 public:
  // Returns the operation's index in the history.
  std::size_t invoke(std::string name, std::vector<std::int64_t> args = {});
  void respond(std::size_t op, std::vector<std::int64_t> result = {});
  // Fills in a result after the response, for operations whose interval ends
  // before their return value is computed.
  void set_result(std::size_t op, std::vector<std::int64_t> result);

  // Process running now, or -1 on the driver.
  int process() const noexcept { return process_; }

  // Normalized identity of a counted object, stable across replays.
  std::int64_t identity(std::int64_t raw_uid);

 private:
  friend class Execution;
  int process_ = -1;
  std::vector<int> next_op_;
  std::vector<int> current_op_;
  History history_;
  std::uint64_t* clock_ = nullptr;
  UidNormalizer* normalizer_ = nullptr;
};

struct ChoicePoint {
  std::vector<int> enabled;  // unfinished processes, ascending
  int chosen = 0;            // process index
};

struct RunResult {
  EventTrace trace;
  History history;
  std::vector<ChoicePoint> choices;
  std::optional<std::string> finish_failure;
};

struct RunOptions {
  // Choice points past this index are recorded without their enabled sets.
  std::size_t record_enabled_up_to = SIZE_MAX;
  std::size_t max_choices = 1'000'000;  // guards against non-terminating programs
};

// Executes exactly the interleaving given by the schedule. Throws
// ScheduleError if an explicit step names an unregistered or finished process.
RunResult run_schedule(const ScenarioFactory& factory, const Schedule& schedule,
                       const RunOptions& options = {});

struct Violation {
  std::string invariant;  // short identifier
  std::string message;
  std::size_t event_index = 0;
};

using Checker = std::function<std::optional<Violation>(const Scenario&, const RunResult&)>;

// Invariants, linearizability against the scenario's oracle, and finish().
std::optional<Violation> default_check(const Scenario& scenario, const RunResult& run);

struct Failure {
  Violation violation;
  Schedule schedule;  // minimized
  Schedule original;
};

struct ExploreOptions {
  // Number of leading choice points enumerated exhaustively; the rest of each
  // execution follows the schedule's completion policy.
  std::size_t depth = 14;
  std::size_t max_schedules = 0;  // 0: no cap
  bool minimize = true;
};

struct ExploreResult {
  std::size_t schedules = 0;
  std::size_t events = 0;
  std::size_t max_choices = 0;
  bool complete = true;  // false if max_schedules stopped the search
  std::optional<Failure> failure;
};

ExploreResult explore(const ScenarioFactory& factory, const ExploreOptions& options,
                      const Checker& check = default_check);

// Runs count executions with seeds first_seed, first_seed+1, ...
ExploreResult explore_random(const ScenarioFactory& factory, std::uint64_t first_seed,
                             std::size_t count, const Checker& check = default_check,
                             bool minimize = true);

// Shrinks a failing schedule while the same invariant still fails.
Schedule minimize_schedule(const ScenarioFactory& factory, const Schedule& failing,
                           const std::string& invariant, const Checker& check = default_check);

// Runs a schedule and checks it; nullopt when it passes.
std::optional<Violation> check_schedule(const ScenarioFactory& factory, const Schedule& schedule,
                                        const Checker& check = default_check);

}  // namespace mvgc::verify
