#include "mvgc/verify/linearizability.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <unordered_set>

namespace mvgc::verify {

namespace {

struct Search {
  const History& h;
  std::vector<std::size_t> order;
  std::vector<bool> done;
  std::unordered_set<std::string> seen;
  std::size_t visited = 0;
  std::size_t completed_left = 0;

  // An operation may go next only if no other undone operation finished
  // before it was invoked.
  bool minimal(std::size_t i) const {
    for (std::size_t j = 0; j < h.ops.size(); ++j) {
      if (j == i || done[j] || !h.ops[j].completed) continue;
      if (h.ops[j].response < h.ops[i].invoke) return false;
    }
    return true;
  }

  std::string memo_key(const Oracle& s) const {
    std::string k;
    k.reserve(done.size() + 16);
    for (bool d : done) k.push_back(d ? '1' : '0');
    k.push_back('|');
    k += s.key();
    return k;
  }

  bool dfs(const Oracle& state) {
    ++visited;
    if (completed_left == 0) return true;
    if (!seen.insert(memo_key(state)).second) return false;
    for (std::size_t i = 0; i < h.ops.size(); ++i) {
      if (done[i] || !minimal(i)) continue;
      auto next = state.clone();
      if (!next->apply(h.ops[i])) continue;
      done[i] = true;
      if (h.ops[i].completed) --completed_left;
      order.push_back(i);
      if (dfs(*next)) return true;
      order.pop_back();
      if (h.ops[i].completed) ++completed_left;
      done[i] = false;
    }
    return false;
  }
};

template <class T>
void append_vec(std::ostringstream& out, const std::vector<T>& v) {
  for (const auto& x : v) out << x << ',';
}

}  // namespace

LinearizationResult check_linearizable(const History& history, const Oracle& initial) {
  Search s{history, {}, std::vector<bool>(history.ops.size(), false), {}, 0, 0};
  for (const auto& op : history.ops) s.completed_left += op.completed ? 1 : 0;
  LinearizationResult r;
  r.ok = s.dfs(initial);
  r.order = std::move(s.order);
  r.states_visited = s.visited;
  return r;
}

// ---- TrackerOracle ----

bool TrackerOracle::apply(const Operation& op) {
  if (op.name == "advance") {
    ++source_;
    return true;
  }
  if (op.name == "announce") {
    if (!op.completed) {
      // A pending announce may already have taken effect with any value the
      // source could hold; assume the current one.
      announced_.insert(std::upper_bound(announced_.begin(), announced_.end(), source_), source_);
      return true;
    }
    if (op.result.empty() || op.result[0] != source_) return false;
    announced_.insert(std::upper_bound(announced_.begin(), announced_.end(), source_), source_);
    return true;
  }
  if (op.name == "unannounce") {
    auto it = std::lower_bound(announced_.begin(), announced_.end(), op.args.at(0));
    if (it == announced_.end() || *it != op.args[0]) return false;
    announced_.erase(it);
    return true;
  }
  if (op.name == "deprecate") {
    Held added{op.args.at(0), op.args.at(1), op.args.at(2)};
    held_.insert(std::upper_bound(held_.begin(), held_.end(), added), added);
    if (!op.completed) return true;
    for (std::int64_t o : op.result) {
      auto it = std::find_if(held_.begin(), held_.end(), [&](const Held& x) { return x.object == o; });
      if (it == held_.end()) return false;
      for (std::int64_t a : announced_) {
        if (it->low <= a && a < it->high) return false;
      }
      held_.erase(it);
    }
    return true;
  }
  return false;
}

std::string TrackerOracle::key() const {
  std::ostringstream out;
  out << source_ << ';';
  append_vec(out, announced_);
  out << ';';
  for (const auto& h : held_) out << h.object << ':' << h.low << ':' << h.high << ',';
  return out.str();
}

// ---- ChainOracle ----

void ChainOracle::preload(std::int64_t id, std::int64_t ts) { chain_.push_back({id, ts, false}); }

bool ChainOracle::apply(const Operation& op) {
  auto index_of = [&](std::int64_t id) -> std::ptrdiff_t {
    for (std::size_t i = 0; i < chain_.size(); ++i) {
      if (chain_[i].id == id) return static_cast<std::ptrdiff_t>(i);
    }
    return -1;
  };
  std::int64_t head = chain_.empty() ? 0 : chain_.back().id;
  if (op.name == "get_head") {
    return !op.completed || op.result.at(0) == head;
  }
  if (op.name == "try_append") {
    bool succeeds = op.args.at(0) == head;
    if (op.completed && (op.result.at(0) != 0) != succeeds) return false;
    if (succeeds) chain_.push_back({op.args.at(1), INT64_MAX, false});
    return true;
  }
  if (op.name == "set_ts") {
    auto i = index_of(op.args.at(0));
    if (i < 0) return false;
    chain_[static_cast<std::size_t>(i)].ts = op.args.at(1);
    return true;
  }
  if (op.name == "remove") {
    auto i = index_of(op.args.at(0));
    if (i < 0 || chain_[static_cast<std::size_t>(i)].removed) return false;
    chain_[static_cast<std::size_t>(i)].removed = true;
    return true;
  }
  if (op.name == "find") {
    if (!op.completed) return true;
    auto start = index_of(op.args.at(0));
    if (start < 0) return false;
    std::int64_t want = 0;
    for (auto i = start; i >= 0; --i) {
      const Node& n = chain_[static_cast<std::size_t>(i)];
      if (n.removed) continue;
      if (n.ts <= op.args.at(1)) {
        want = n.id;
        break;
      }
    }
    return op.result.at(0) == want;
  }
  return false;
}

std::string ChainOracle::key() const {
  std::ostringstream out;
  for (const auto& n : chain_) out << n.id << ':' << n.ts << ':' << n.removed << ',';
  return out.str();
}

// ---- SnapshotOracle ----

bool SnapshotOracle::apply(const Operation& op) {
  if (op.name == "v_read") {
    return !op.completed || op.result.at(0) == cells_.at(static_cast<std::size_t>(op.args.at(0)));
  }
  if (op.name == "v_cas") {
    auto& cell = cells_.at(static_cast<std::size_t>(op.args.at(0)));
    bool succeeds = cell == op.args.at(1);
    if (op.completed && (op.result.at(0) != 0) != succeeds) return false;
    if (succeeds) cell = op.args.at(2);
    return true;
  }
  if (op.name == "snapshot") {
    if (!op.completed) return true;
    if (op.result.size() != op.args.size()) return false;
    for (std::size_t i = 0; i < op.args.size(); ++i) {
      if (cells_.at(static_cast<std::size_t>(op.args[i])) != op.result[i]) return false;
    }
    return true;
  }
  return false;
}

std::string SnapshotOracle::key() const {
  std::ostringstream out;
  append_vec(out, cells_);
  return out.str();
}

}  // namespace mvgc::verify
