#pragma once

// Exact linearizability check by search over real-time-respecting orders.
// Exponential in the number of concurrent operations; meant for the small
// histories produced by schedule exploration.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mvgc::verify {

struct Operation {
  int process = -1;
  std::string name;
  std::vector<std::int64_t> args;
  std::vector<std::int64_t> result;
  std::uint64_t invoke = 0;
  std::uint64_t response = 0;  // 0 while pending
  bool completed = false;
};

struct History {
  std::vector<Operation> ops;
};

// Sequential specification. apply() returns false when the operation's
// recorded result is impossible in the current state.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual std::unique_ptr<Oracle> clone() const = 0;
  virtual bool apply(const Operation& op) = 0;
  // Canonical encoding of the state, used to prune repeated search states.
  virtual std::string key() const = 0;
};

struct LinearizationResult {
  bool ok = false;
  std::vector<std::size_t> order;  // a witness when ok
  std::size_t states_visited = 0;
};

// Pending operations may be linearized or dropped.
LinearizationResult check_linearizable(const History& history, const Oracle& initial);

// Range-tracking object: a multiset of announced timestamps and a set of
// deprecated triples. Operations:
//   announce()      result {t}       t must equal the source value
//   unannounce(t)                    removes one copy of t
//   advance()                        increments the source
//   deprecate(o, low, high)  result {o1, o2, ...}
//     every returned object was deprecated (possibly by this call), not
//     returned before, and its interval holds no announced timestamp.
class TrackerOracle final : public Oracle {
 public:
  explicit TrackerOracle(std::int64_t source = 0) : source_(source) {}
  std::unique_ptr<Oracle> clone() const override { return std::make_unique<TrackerOracle>(*this); }
  bool apply(const Operation& op) override;
  std::string key() const override;

 private:
  struct Held {
    std::int64_t object, low, high;
    friend auto operator<=>(const Held&, const Held&) = default;
  };
  std::int64_t source_;
  std::vector<std::int64_t> announced_;  // sorted
  std::vector<Held> held_;               // sorted
};

// Version list as a sequential chain of appended nodes. Node ids are scenario
// labels; 0 means null. Operations:
//   get_head()                result {id}
//   try_append(expected, id)  result {ok}
//   remove(id)
//   find(start, ts)           result {id}  first non-removed node at or left
//                                          of start whose ts <= the query
//   set_ts(id, ts)
class ChainOracle final : public Oracle {
 public:
  std::unique_ptr<Oracle> clone() const override { return std::make_unique<ChainOracle>(*this); }
  bool apply(const Operation& op) override;
  std::string key() const override;

  // Nodes present before the history starts, oldest first.
  void preload(std::int64_t id, std::int64_t ts);

 private:
  struct Node {
    std::int64_t id, ts;
    bool removed;
  };
  std::vector<Node> chain_;
};

// Multiversion map over cells 0..n-1. Operations:
//   v_read(cell)                   result {value}
//   v_cas(cell, expected, desired) result {ok}
//   snapshot(c0, c1, ...)          result {v0, v1, ...}  values of the listed
//                                  cells at the snapshot's linearization point
class SnapshotOracle final : public Oracle {
 public:
  explicit SnapshotOracle(std::vector<std::int64_t> initial) : cells_(std::move(initial)) {}
  std::unique_ptr<Oracle> clone() const override { return std::make_unique<SnapshotOracle>(*this); }
  bool apply(const Operation& op) override;
  std::string key() const override;

 private:
  std::vector<std::int64_t> cells_;
};

}  // namespace mvgc::verify
