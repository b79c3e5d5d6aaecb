#include "mvgc/verify/invariants.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace mvgc::verify {

using probe::Field;
using probe::Kind;

namespace {

constexpr std::int64_t kNull = probe::kNone;
constexpr std::int64_t kTop = probe::kTop;
constexpr std::int64_t kFrozen = probe::kFrozen;

constexpr std::int64_t kUnmarked = static_cast<std::int64_t>(Status::unmarked);
constexpr std::int64_t kMarked = static_cast<std::int64_t>(Status::marked);
constexpr std::int64_t kFinalized = static_cast<std::int64_t>(Status::finalized);

bool is_node(std::int64_t v) { return v >= probe::kFirstUid; }

struct NodeState {
  std::int64_t counter = 0;
  std::int64_t priority = 0;
  std::int64_t list = 0;
  std::int64_t left = kNull;
  std::int64_t right = kNull;
  std::int64_t status = kUnmarked;
  std::int64_t left_desc = kNull;
  std::int64_t right_desc = kNull;
  bool left_freeze_tried = false;
  bool right_freeze_tried = false;
  bool active = false;
};

using Triple = std::array<std::int64_t, 3>;

struct FindState {
  std::unordered_set<std::int64_t> forward_dests;
  std::unordered_set<std::int64_t> upward_sources;
};

class Replay {
 public:
  Replay(const InvariantOptions& options, InvariantReport& report) : opt_(options), rep_(report) {}

  bool stopped() const { return opt_.stop_at_first && !rep_.violations.empty(); }

  void event(std::size_t index, const TraceEvent& te) {
    index_ = index;
    const auto& e = te.event;
    switch (e.kind) {
      case Kind::node_init: on_node_init(e); break;
      case Kind::descriptor: descs_[static_cast<std::int64_t>(e.object)] = {e.a, e.b, e.c}; break;
      case Kind::splice_call: add_triple({e.a, e.b, e.c}, "splice"); break;
      case Kind::find_begin:
        finds_[te.process] = FindState{};
        ++rep_.finds;
        break;
      case Kind::find_step: on_find_step(te); break;
      case Kind::read: on_read(te); break;
      case Kind::write:
      case Kind::cas: on_update(e); break;
      default: break;
    }
  }

  void finish() {
    if (!opt_.quiescent_end) return;
    std::map<std::int64_t, std::vector<std::int64_t>> by_list;
    for (const auto& [id, n] : nodes_) {
      if (n.active && n.status != kFinalized) by_list[n.list].push_back(id);
    }
    for (auto& [list, ids] : by_list) {
      std::sort(ids.begin(), ids.end(),
                [&](auto x, auto y) { return nodes_[x].counter < nodes_[y].counter; });
      if (nodes_[ids.front()].left != kNull) {
        fail("quiescent_chain", "first non-finalized node " + std::to_string(ids.front()) +
                                    " has a non-null left link");
        return;
      }
      if (nodes_[ids.back()].right != kNull) {
        fail("quiescent_chain", "last non-finalized node " + std::to_string(ids.back()) +
                                    " has a non-null right link");
        return;
      }
      for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
        if (nodes_[ids[i]].right != ids[i + 1] || nodes_[ids[i + 1]].left != ids[i]) {
          fail("quiescent_chain", "nodes " + std::to_string(ids[i]) + " and " +
                                      std::to_string(ids[i + 1]) + " are not mutually linked");
          return;
        }
      }
    }
  }

 private:
  void fail(const char* id, std::string msg) {
    if (stopped()) return;
    rep_.violations.push_back({id, std::move(msg), index_});
  }

  NodeState* node(std::int64_t id) {
    auto it = nodes_.find(id);
    return it == nodes_.end() ? nullptr : &it->second;
  }

  std::int64_t counter(std::int64_t id) {
    NodeState* n = node(id);
    return n ? n->counter : -1;
  }

  void on_node_init(const probe::Event& e) {
    NodeState n;
    n.counter = e.a;
    n.priority = e.b;
    n.list = e.c;
    n.left = e.d;
    nodes_[static_cast<std::int64_t>(e.object)] = n;
  }

  // Nodes reachable from the list head through left and right links.
  bool lr_reachable(std::int64_t target) {
    NodeState* t = node(target);
    if (t == nullptr) return false;
    auto h = heads_.find(t->list);
    if (h == heads_.end() || !is_node(h->second)) return false;
    std::unordered_set<std::int64_t> seen{h->second};
    std::deque<std::int64_t> q{h->second};
    while (!q.empty()) {
      std::int64_t cur = q.front();
      q.pop_front();
      if (cur == target) return true;
      NodeState* n = node(cur);
      if (n == nullptr) continue;
      for (std::int64_t next : {n->left, n->right}) {
        if (is_node(next) && seen.insert(next).second) q.push_back(next);
      }
    }
    return false;
  }

  void on_read(const TraceEvent& te) {
    const auto& e = te.event;
    if (e.field != Field::left && e.field != Field::right) return;
    last_read_reachable_[te.process] = lr_reachable(static_cast<std::int64_t>(e.object));
  }

  void on_find_step(const TraceEvent& te) {
    const auto& e = te.event;
    auto fit = finds_.find(te.process);
    if (fit == finds_.end()) return;
    FindState& f = fit->second;
    auto source = static_cast<std::int64_t>(e.object);
    bool reachable = last_read_reachable_[te.process];
    if (reachable) {
      ++rep_.forward_steps;
      if (e.b != 0) fail("traversal_distinct", "forward traversal from " + std::to_string(source) + " used a right link");
      if (!f.forward_dests.insert(e.a).second) {
        fail("traversal_distinct", "forward traversal revisited destination " + std::to_string(e.a));
      }
    } else {
      ++rep_.upward_steps;
      if (!f.upward_sources.insert(source).second) {
        fail("traversal_distinct", "upward traversal repeated source " + std::to_string(source));
      }
    }
  }

  void add_triple(const Triple& t, const char* origin) {
    if (triples_.insert(t).second) {
      ++rep_.splice_triples;
      // t as the right-hand triple (W,X,Y),(X,Y,Z): some earlier (W, t0, t1).
      if (is_node(t[0]) && bc_.count({t[0], t[1]}) != 0) {
        fail("no_overlap", std::string(origin) + " triple (" + std::to_string(t[0]) + "," +
                               std::to_string(t[1]) + "," + std::to_string(t[2]) +
                               ") overlaps an earlier (*," + std::to_string(t[0]) + "," +
                               std::to_string(t[1]) + ")");
      }
      if (is_node(t[2]) && ab_.count({t[1], t[2]}) != 0) {
        fail("no_overlap", std::string(origin) + " triple (" + std::to_string(t[0]) + "," +
                               std::to_string(t[1]) + "," + std::to_string(t[2]) +
                               ") overlaps an earlier (" + std::to_string(t[1]) + "," +
                               std::to_string(t[2]) + ",*)");
      }
      ab_.insert({t[0], t[1]});
      bc_.insert({t[1], t[2]});
      by_middle_[t[1]].push_back(t);
    }
    check_splice_args(t[1]);
  }

  void check_splice_args(std::int64_t b) {
    auto it = by_middle_.find(b);
    if (it == by_middle_.end()) return;
    NodeState* n = node(b);
    if (n == nullptr) return;
    for (const Triple& t : it->second) {
      bool left_ok = n->left == t[0] || n->left == kTop;
      bool right_ok = n->right == t[2] || n->right == kTop;
      if (!left_ok || !right_ok) {
        fail("splice_args", "node " + std::to_string(b) + " links (" + std::to_string(n->left) +
                                "," + std::to_string(n->right) + ") disagree with triple (" +
                                std::to_string(t[0]) + "," + std::to_string(t[1]) + "," +
                                std::to_string(t[2]) + ")");
        return;
      }
    }
  }

  void check_no_skip(std::int64_t list) {
    std::vector<std::pair<std::int64_t, std::int64_t>> order;  // (counter, id)
    for (const auto& [id, n] : nodes_) {
      if (n.active && n.list == list) order.push_back({n.counter, id});
    }
    std::sort(order.begin(), order.end());
    for (std::size_t i = 0; i < order.size(); ++i) {
      const NodeState& x = nodes_[order[i].second];
      if (x.status != kFinalized) continue;
      if (x.right != kTop) {
        std::int64_t limit = is_node(x.right) ? counter(x.right) : INT64_MAX;
        for (std::size_t j = i + 1; j < order.size() && order[j].first < limit; ++j) {
          if (nodes_[order[j].second].status != kFinalized) {
            fail("no_skip", "finalized " + std::to_string(order[i].second) + " right link skips " +
                                std::to_string(order[j].second));
            return;
          }
        }
      }
      if (x.left != kTop) {
        std::int64_t limit = is_node(x.left) ? counter(x.left) : INT64_MIN;
        for (std::size_t j = i; j-- > 0 && order[j].first > limit;) {
          if (nodes_[order[j].second].status != kFinalized) {
            fail("no_skip", "finalized " + std::to_string(order[i].second) + " left link skips " +
                                std::to_string(order[j].second));
            return;
          }
        }
      }
    }
  }

  void on_update(const probe::Event& e) {
    std::int64_t old_value = e.kind == Kind::cas ? e.a : kNull;
    std::int64_t new_value = e.b;
    auto obj = static_cast<std::int64_t>(e.object);
    switch (e.field) {
      case Field::head:
        if (e.ok) {
          heads_[obj] = new_value;
          if (NodeState* n = node(new_value)) n->active = true;
        }
        break;
      case Field::left:
      case Field::right:
        if (e.ok) on_link(obj, e.field == Field::right, old_value, new_value);
        break;
      case Field::status:
        on_status(obj, e.kind == Kind::cas ? e.a : kUnmarked, new_value, e.ok, e.kind == Kind::write);
        break;
      case Field::left_desc:
      case Field::right_desc:
        on_desc(obj, e.field == Field::right_desc, old_value, new_value, e.ok);
        break;
      default:
        break;
    }
  }

  void on_link(std::int64_t x_id, bool right, std::int64_t old_value, std::int64_t new_value) {
    NodeState* x = node(x_id);
    if (x == nullptr) return;
    std::int64_t& link = right ? x->right : x->left;
    std::int64_t other = right ? x->left : x->right;
    if (link != old_value) {
      fail("link_monotonicity", "shadow state of node " + std::to_string(x_id) + " diverged");
    }
    if (old_value == kTop) fail("top_placement", "TOP link of " + std::to_string(x_id) + " overwritten");
    if (new_value == kTop) {
      if (x->status != kFinalized) fail("top_placement", "TOP written into non-finalized node " + std::to_string(x_id));
      if (other == kTop) fail("both_top", "both links of node " + std::to_string(x_id) + " are TOP");
    } else {
      std::int64_t cx = x->counter;
      auto ok_dir = [&](std::int64_t v) {
        if (!is_node(v)) return true;
        return right ? counter(v) > cx : counter(v) < cx;
      };
      bool ok = ok_dir(old_value) && ok_dir(new_value);
      if (is_node(old_value) && is_node(new_value)) {
        ok = ok && (right ? counter(old_value) < counter(new_value) : counter(old_value) > counter(new_value));
      }
      if (!ok) {
        fail("link_monotonicity", std::string(right ? "right" : "left") + " link of " +
                                      std::to_string(x_id) + " moved from " +
                                      std::to_string(old_value) + " to " + std::to_string(new_value));
      }
    }
    link = new_value;
    check_splice_args(x_id);
    check_no_skip(x->list);
  }

  void on_status(std::int64_t id, std::int64_t from, std::int64_t to, bool ok, bool is_write) {
    NodeState* n = node(id);
    if (n == nullptr || !ok) return;
    if (is_write) {
      if (to != kMarked || n->status != kUnmarked) {
        fail("status_transition", "node " + std::to_string(id) + " marked from status " + std::to_string(n->status));
      }
    } else if (!(from == kMarked && to == kFinalized && n->status == kMarked)) {
      fail("status_transition", "node " + std::to_string(id) + " moved " + std::to_string(n->status) +
                                    " -> " + std::to_string(to));
    }
    n->status = to;
    if (to == kFinalized) check_no_skip(n->list);
  }

  void on_desc(std::int64_t id, bool right, std::int64_t old_value, std::int64_t new_value, bool ok) {
    NodeState* n = node(id);
    if (n == nullptr) return;
    bool& tried = right ? n->right_freeze_tried : n->left_freeze_tried;
    std::int64_t& field = right ? n->right_desc : n->left_desc;
    if (ok) {
      if (new_value != kFrozen && tried) {
        fail("freeze_discipline", "descriptor " + std::to_string(new_value) + " stored into node " +
                                      std::to_string(id) + " after a freeze attempt");
      }
      if (old_value == kFrozen && new_value != kFrozen) {
        fail("freeze_discipline", "FROZEN replaced in node " + std::to_string(id));
      }
      field = new_value;
      if (is_node(new_value)) {
        auto d = descs_.find(new_value);
        if (d != descs_.end()) add_triple(d->second, "descriptor");
      }
    }
    if (new_value == kFrozen) tried = true;
  }

  const InvariantOptions& opt_;
  InvariantReport& rep_;
  std::size_t index_ = 0;
  std::unordered_map<std::int64_t, NodeState> nodes_;
  std::unordered_map<std::int64_t, std::int64_t> heads_;
  std::unordered_map<std::int64_t, Triple> descs_;
  std::set<Triple> triples_;
  std::set<std::pair<std::int64_t, std::int64_t>> ab_, bc_;
  std::unordered_map<std::int64_t, std::vector<Triple>> by_middle_;
  std::unordered_map<int, FindState> finds_;
  std::unordered_map<int, bool> last_read_reachable_;
};

}  // namespace

InvariantReport check_invariants(const EventTrace& trace, const InvariantOptions& options) {
  InvariantReport report;
  Replay c(options, report);
  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    c.event(i, trace.events[i]);
    ++report.events;
    if (c.stopped()) return report;
  }
  c.finish();
  return report;
}

std::optional<Violation> check_find_trace(const FindTrace& trace) {
  std::unordered_set<std::int64_t> right_sources;
  std::unordered_set<std::int64_t> left_dests;
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const FindStep& s = trace.steps[i];
    if (s.via_right) {
      if (!right_sources.insert(s.source).second) {
        return Violation{"traversal_distinct", "upward traversal repeated source " + std::to_string(s.source), i};
      }
    } else if (!s.source_finalized) {
      if (!left_dests.insert(s.destination).second) {
        return Violation{"traversal_distinct", "forward traversal revisited destination " + std::to_string(s.destination), i};
      }
    }
  }
  return std::nullopt;
}

}  // namespace mvgc::verify
