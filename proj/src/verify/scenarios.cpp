#include "mvgc/verify/scenarios.hpp"

#include <algorithm>
#include <atomic>
#include <memory>
#include <stdexcept>

#include "mvgc/probe.hpp"
#include "mvgc/range_tracker.hpp"
#include "mvgc/snapshot_store.hpp"
#include "mvgc/version_list.hpp"

namespace mvgc::verify {

namespace {

// ---- version list ----

constexpr int kPreload = 5;

class ListScenario final : public Scenario {
 public:
  explicit ListScenario(ListMixOptions opt) : opt_(opt), list_(opt.mode) {}

  int num_processes() const override { return opt_.processes; }

  void setup(Context& ctx) override {
    for (int i = 0; i < kPreload; ++i) {
      NodeRef n = make_node(i);
      list_.try_append(list_.get_head(), n);
      n->ts.store(10 * (i + 1));
      pre_ids_.push_back(ctx.identity(n.uid()));
      pre_.push_back(std::move(n));
    }
  }

  void run(int p, Context& ctx) override {
    if (opt_.processes == 2) {
      switch (opt_.variant) {
        case 0:
          if (p == 0) {
            append_and_remove_old(ctx, 60);
          } else {
            remove(ctx, pre_[1]);
            remove(ctx, pre_[2]);
          }
          return;
        case 1:
          if (p == 0) {
            remove(ctx, pre_[2]);
            find(ctx, 15);
          } else {
            find(ctx, 5);
            remove(ctx, pre_[1]);
          }
          return;
        case 2:
          if (p == 0) {
            remove(ctx, pre_[2]);
          } else {
            remove(ctx, pre_[1]);
            remove(ctx, pre_[3]);
          }
          return;
        case 3:
          if (p == 0) {
            append_and_remove_old(ctx, 60);
            append_and_remove_old(ctx, 70);
          } else {
            remove(ctx, pre_[1]);
            find(ctx, 15);
          }
          return;
        default:
          break;
      }
    } else if (opt_.processes == 3) {
      switch (opt_.variant) {
        case 0:
          if (p == 0) {
            append_and_remove_old(ctx, 60);
          } else if (p == 1) {
            remove(ctx, pre_[1]);
            remove(ctx, pre_[2]);
          } else {
            find(ctx, 15);
          }
          return;
        case 1:
          remove(ctx, pre_[static_cast<std::size_t>(p) + 1]);
          return;
        default:
          break;
      }
    }
    throw std::invalid_argument("unknown list scenario variant");
  }

  std::unique_ptr<Oracle> oracle() const override {
    auto o = std::make_unique<ChainOracle>();
    for (int i = 0; i < kPreload; ++i) o->preload(pre_ids_[static_cast<std::size_t>(i)], 10 * (i + 1));
    return o;
  }

 private:
  NodeRef get_head(Context& ctx) {
    auto op = ctx.invoke("get_head");
    NodeRef h = list_.get_head();
    ctx.respond(op, {ctx.identity(h.uid())});
    return h;
  }

  void append_and_remove_old(Context& ctx, Timestamp ts) {
    NodeRef h = get_head(ctx);
    NodeRef x = make_node(ts);
    auto op = ctx.invoke("try_append", {ctx.identity(h.uid()), ctx.identity(x.uid())});
    bool ok = list_.try_append(h, x);
    ctx.respond(op, {ok ? 1 : 0});
    if (!ok) return;
    auto st = ctx.invoke("set_ts", {ctx.identity(x.uid()), ts});
    x->ts.store(ts);
    ctx.respond(st);
    remove(ctx, h);
    appended_.push_back(std::move(x));
  }

  void remove(Context& ctx, const NodeRef& n) {
    auto op = ctx.invoke("remove", {ctx.identity(n.uid())});
    VersionList::remove(n);
    ctx.respond(op);
  }

  void find(Context& ctx, Timestamp ts) {
    NodeRef h = get_head(ctx);
    auto op = ctx.invoke("find", {ctx.identity(h.uid()), ts});
    NodeRef r = VersionList::find(h, ts);
    ctx.respond(op, {ctx.identity(r.uid())});
  }

  ListMixOptions opt_;
  VersionList list_;
  std::vector<NodeRef> pre_;
  std::vector<NodeRef> appended_;
  std::vector<std::int64_t> pre_ids_;
};

// ---- snapshot ----

class SnapshotScenario final : public Scenario {
 public:
  explicit SnapshotScenario(SnapshotMixOptions opt)
      : opt_(opt),
        camera_(TrackerConfig{static_cast<std::size_t>(opt.processes), 2}) {}

  ~SnapshotScenario() override {
    handles_.clear();
    cells_.clear();
  }

  int num_processes() const override { return opt_.processes; }

  void setup(Context&) override {
    for (int i = 0; i < 2; ++i) cells_.push_back(std::make_unique<VersionedCAS>(0, camera_, opt_.mode));
    for (int i = 0; i < opt_.processes; ++i) handles_.push_back(camera_.register_process());
  }

  void run(int p, Context& ctx) override {
    if (opt_.processes == 2) {
      switch (opt_.variant) {
        case 0:
          if (p == 0) {
            v_cas(ctx, p, 0, 0, 1);
            v_cas(ctx, p, 1, 0, 2);
            v_cas(ctx, p, 0, 1, 3);
          } else {
            snapshot(ctx, p);
          }
          return;
        case 1:
          if (p == 0) {
            v_cas(ctx, p, 0, 0, 1);
            v_cas(ctx, p, 0, 1, 2);
          } else {
            v_cas(ctx, p, 0, 0, 5);
            snapshot(ctx, p);
          }
          return;
        case 2:
          if (p == 0) {
            snapshot(ctx, p);
            snapshot(ctx, p);
          } else {
            v_cas(ctx, p, 0, 0, 1);
            v_cas(ctx, p, 0, 1, 2);
            v_cas(ctx, p, 0, 2, 3);
          }
          return;
        default:
          break;
      }
    } else if (opt_.processes == 3 && opt_.variant == 0) {
      if (p == 0) {
        v_cas(ctx, p, 0, 0, 1);
        v_cas(ctx, p, 1, 0, 2);
      } else if (p == 1) {
        snapshot(ctx, p);
      } else {
        v_read(ctx, 1);
        v_cas(ctx, p, 1, 2, 4);
      }
      return;
    }
    throw std::invalid_argument("unknown snapshot scenario variant");
  }

  std::optional<std::string> finish(Context&) override {
    camera_.drain();
    StoreCounts c = camera_.counts();
    if (c.vnodes_deprecated != c.vnodes_removed) {
      return "drain left " + std::to_string(c.vnodes_deprecated - c.vnodes_removed) +
             " deprecated versions unreclaimed";
    }
    return std::nullopt;
  }

  std::unique_ptr<Oracle> oracle() const override {
    return std::make_unique<SnapshotOracle>(std::vector<std::int64_t>{0, 0});
  }

 private:
  ProcessHandle& handle(int p) { return handles_[static_cast<std::size_t>(p)]; }

  void v_cas(Context& ctx, int p, int cell, Value expected, Value desired) {
    auto op = ctx.invoke("v_cas", {cell, expected, desired});
    bool ok = cells_[static_cast<std::size_t>(cell)]->v_cas(handle(p), expected, desired);
    ctx.respond(op, {ok ? 1 : 0});
  }

  void v_read(Context& ctx, int cell) {
    auto op = ctx.invoke("v_read", {cell});
    Value v = cells_[static_cast<std::size_t>(cell)]->v_read();
    ctx.respond(op, {v});
  }

  // The snapshot is linearized inside take_snapshot; the reads that follow
  // only report what it captured.
  void snapshot(Context& ctx, int p) {
    auto op = ctx.invoke("snapshot", {0, 1});
    Timestamp ts = camera_.take_snapshot(handle(p));
    ctx.respond(op);
    std::vector<std::int64_t> values;
    for (auto& cell : cells_) values.push_back(cell->read_version(ts));
    ctx.set_result(op, std::move(values));
    camera_.unreserve(handle(p));
  }

  SnapshotMixOptions opt_;
  Camera camera_;
  std::vector<std::unique_ptr<VersionedCAS>> cells_;
  std::vector<ProcessHandle> handles_;
};

// ---- range tracker ----

class TrackerScenario final : public Scenario {
 public:
  explicit TrackerScenario(TrackerMixOptions opt)
      : opt_(opt), tracker_(TrackerConfig{static_cast<std::size_t>(opt.processes), 2}) {}

  int num_processes() const override { return opt_.processes; }

  void setup(Context&) override {
    for (int i = 0; i < opt_.processes; ++i) handles_.push_back(tracker_.register_process());
  }

  void run(int p, Context& ctx) override {
    if (p == 0) {
      Timestamp t = announce(ctx, p);
      deprecate(ctx, p, 1, 0, 1);
      deprecate(ctx, p, 2, 1, 2);
      unannounce(ctx, p, t);
    } else if (p == 1) {
      advance(ctx);
      deprecate(ctx, p, 3, 0, 1);
      deprecate(ctx, p, 4, 2, 3);
    } else {
      advance(ctx);
      Timestamp t = announce(ctx, p);
      deprecate(ctx, p, 5, 1, 3);
      unannounce(ctx, p, t);
    }
  }

  std::optional<std::string> finish(Context&) override {
    for (Payload x : tracker_.drain()) returned_.push_back(static_cast<std::int64_t>(x.bits));
    std::sort(returned_.begin(), returned_.end());
    if (std::adjacent_find(returned_.begin(), returned_.end()) != returned_.end()) {
      return std::string("a payload was returned twice");
    }
    if (returned_.size() != deprecated_) {
      return "drain with no announcements left " + std::to_string(deprecated_ - returned_.size()) +
             " payloads held";
    }
    return std::nullopt;
  }

  std::unique_ptr<Oracle> oracle() const override { return std::make_unique<TrackerOracle>(0); }

 private:
  ProcessHandle& handle(int p) { return handles_[static_cast<std::size_t>(p)]; }

  Timestamp announce(Context& ctx, int p) {
    auto op = ctx.invoke("announce");
    Timestamp t = tracker_.announce(handle(p), source_);
    ctx.respond(op, {t});
    return t;
  }

  void unannounce(Context& ctx, int p, Timestamp t) {
    auto op = ctx.invoke("unannounce", {t});
    tracker_.unannounce(handle(p));
    ctx.respond(op);
  }

  void advance(Context& ctx) {
    auto op = ctx.invoke("advance");
    Timestamp v = source_.fetch_add(1) + 1;
    probe::step_write(probe::Field::source, 0, v);
    ctx.respond(op);
  }

  void deprecate(Context& ctx, int p, std::int64_t label, Timestamp low, Timestamp high) {
    auto op = ctx.invoke("deprecate", {label, low, high});
    ++deprecated_;
    std::vector<std::int64_t> out;
    for (Payload x : tracker_.deprecate(handle(p), Payload{static_cast<std::uint64_t>(label)}, low, high)) {
      out.push_back(static_cast<std::int64_t>(x.bits));
    }
    returned_.insert(returned_.end(), out.begin(), out.end());
    ctx.respond(op, std::move(out));
  }

  TrackerMixOptions opt_;
  RangeTracker tracker_;
  std::atomic<Timestamp> source_{0};
  std::vector<ProcessHandle> handles_;
  std::vector<std::int64_t> returned_;
  std::size_t deprecated_ = 0;
};

}  // namespace

int list_mix_variants(int processes) { return processes == 2 ? 4 : processes == 3 ? 2 : 0; }
int snapshot_mix_variants(int processes) { return processes == 2 ? 3 : processes == 3 ? 1 : 0; }

ScenarioFactory list_mix(ListMixOptions options) {
  if (options.variant < 0 || options.variant >= list_mix_variants(options.processes)) {
    throw std::invalid_argument("no list scenario with " + std::to_string(options.processes) +
                                " processes and variant " + std::to_string(options.variant));
  }
  return [options] { return std::make_unique<ListScenario>(options); };
}

ScenarioFactory snapshot_mix(SnapshotMixOptions options) {
  if (options.variant < 0 || options.variant >= snapshot_mix_variants(options.processes)) {
    throw std::invalid_argument("no snapshot scenario with " + std::to_string(options.processes) +
                                " processes and variant " + std::to_string(options.variant));
  }
  return [options] { return std::make_unique<SnapshotScenario>(options); };
}

ScenarioFactory tracker_mix(TrackerMixOptions options) {
  if (options.processes != 2 && options.processes != 3) {
    throw std::invalid_argument("tracker scenario needs 2 or 3 processes");
  }
  return [options] { return std::make_unique<TrackerScenario>(options); };
}

ScenarioFactory scenario_by_name(const std::string& name, int processes, int variant,
                                 ReclaimMode mode) {
  if (name == "list") return list_mix({mode, processes, variant});
  if (name == "snapshot") return snapshot_mix({mode, processes, variant});
  if (name == "tracker") return tracker_mix({processes});
  throw std::invalid_argument("unknown scenario '" + name + "'");
}

}  // namespace mvgc::verify
