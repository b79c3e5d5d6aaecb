#include "mvgc/verify/stress.hpp"

#include <algorithm>
#include <atomic>
#include <barrier>
#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <random>
#include <thread>

#include <boost/lockfree/queue.hpp>

#include "mvgc/probe.hpp"
#include "mvgc/range_tracker.hpp"
#include "mvgc/snapshot_store.hpp"
#include "mvgc/verify/invariants.hpp"
#include "mvgc/verify/pause_gate.hpp"

namespace mvgc::verify {

namespace {

constexpr std::size_t kMaxErrorsPerThread = 8;

void note(std::vector<std::string>& errors, std::string msg) {
  if (errors.size() < kMaxErrorsPerThread) errors.push_back(std::move(msg));
}

std::uint64_t share_of(std::uint64_t total, int threads, int t) {
  auto n = static_cast<std::uint64_t>(threads);
  auto i = static_cast<std::uint64_t>(t);
  return total / n + (i < total % n ? 1 : 0);
}

struct alignas(64) Progress {
  std::atomic<std::uint64_t> a{0};
  std::atomic<std::uint64_t> b{0};
};

}  // namespace

// ---- range tracker ----

TrackerStressResult tracker_stress(const TrackerStressOptions& o) {
  const int P = o.threads;
  RangeTracker tracker({static_cast<std::size_t>(P), o.batch_size});
  const std::size_t B = tracker.batch_size();
  const std::uint64_t total = o.deprecates;
  const std::uint64_t extra = static_cast<std::uint64_t>(P) * B * static_cast<std::uint64_t>(o.extra_flush_phases);

  std::atomic<Timestamp> source{1};
  std::atomic<std::uint64_t> clock{0};
  std::atomic<std::uint64_t> next_id{0};
  std::vector<Timestamp> lows(total + extra), highs(total + extra);

  struct Ann {
    Timestamp value;
    std::uint64_t inv, resp, end;
  };
  struct Ret {
    std::uint64_t id, inv, resp;
  };
  std::vector<std::vector<Ann>> anns(static_cast<std::size_t>(P));
  std::vector<std::vector<Ret>> rets(static_cast<std::size_t>(P));
  std::vector<std::uint64_t> max_call(static_cast<std::size_t>(P), 0);
  std::vector<ProcessHandle> handles;
  for (int t = 0; t < P; ++t) handles.push_back(tracker.register_process());
  std::barrier sync(P);

  auto worker = [&](int t) {
    auto& h = handles[static_cast<std::size_t>(t)];
    auto& my_anns = anns[static_cast<std::size_t>(t)];
    auto& my_rets = rets[static_cast<std::size_t>(t)];
    std::mt19937_64 rng(o.seed * 7919 + static_cast<std::uint64_t>(t));
    Timestamp last = -1;
    std::uint64_t count = 0;

    auto deprecate_one = [&] {
      Timestamp now = source.fetch_add(1) + 1;
      std::uint64_t id = next_id.fetch_add(1);
      Timestamp low = last < 0 ? now : last;
      lows[id] = low;
      highs[id] = now;
      last = now;
      std::uint64_t inv = clock.fetch_add(1);
      auto out = tracker.deprecate(h, Payload{id}, low, now);
      std::uint64_t resp = clock.fetch_add(1);
      for (Payload p : out) my_rets.push_back({p.bits, inv, resp});
      max_call[static_cast<std::size_t>(t)] = std::max<std::uint64_t>(max_call[static_cast<std::size_t>(t)], out.size());
      ++count;
    };

    bool announced = false;
    int held = 0;
    Ann cur{};
    std::uint64_t mine = share_of(total, P, t);
    for (std::uint64_t i = 0; i < mine; ++i) {
      if (!announced && static_cast<int>(rng() % 100) < o.announce_percent) {
        cur.inv = clock.fetch_add(1);
        cur.value = tracker.announce(h, source);
        cur.resp = clock.fetch_add(1);
        announced = true;
        held = 0;
      }
      deprecate_one();
      if (announced && ++held >= o.hold) {
        cur.end = clock.fetch_add(1);
        tracker.unannounce(h);
        my_anns.push_back(cur);
        announced = false;
      }
    }
    if (announced) {
      cur.end = clock.fetch_add(1);
      tracker.unannounce(h);
      my_anns.push_back(cur);
    }
    // Extra flush phases in lockstep rounds with no announcement active.
    for (int phase = 0; phase < o.extra_flush_phases; ++phase) {
      sync.arrive_and_wait();
      std::uint64_t to_flush = B - count % B;
      for (std::uint64_t k = 0; k < to_flush; ++k) deprecate_one();
    }
  };

  std::vector<std::thread> threads;
  for (int t = 0; t < P; ++t) threads.emplace_back(worker, t);
  for (auto& th : threads) th.join();

  TrackerStressResult r;
  r.batch_size = B;
  const std::uint64_t ids = next_id.load();
  r.deprecates = ids;
  std::vector<Ann> all_anns;
  for (auto& v : anns) all_anns.insert(all_anns.end(), v.begin(), v.end());
  r.announcements = all_anns.size();
  std::sort(all_anns.begin(), all_anns.end(), [](const Ann& x, const Ann& y) { return x.value < y.value; });

  std::vector<std::uint8_t> seen(ids, 0);
  for (auto& v : rets) {
    for (const Ret& x : v) {
      ++r.returned;
      if (x.id >= ids) {
        note(r.errors, "returned unknown payload " + std::to_string(x.id));
        continue;
      }
      if (seen[x.id]++ != 0) ++r.duplicate_returns;
      auto it = std::lower_bound(all_anns.begin(), all_anns.end(), lows[x.id],
                                 [](const Ann& a, Timestamp v) { return a.value < v; });
      for (; it != all_anns.end() && it->value < highs[x.id]; ++it) {
        bool active_throughout = it->resp < x.inv && it->end > x.resp;
        bool later = it->inv > x.resp;
        if (active_throughout || later) {
          ++r.covered_returns;
          break;
        }
      }
    }
  }
  for (std::uint64_t id = 0; id < total && id < ids; ++id) r.outstanding_after_extra += seen[id] == 0 ? 1 : 0;
  for (auto m : max_call) r.max_returned_per_call = std::max(r.max_returned_per_call, m);

  if (r.duplicate_returns != 0) note(r.errors, std::to_string(r.duplicate_returns) + " payloads returned twice");
  if (r.covered_returns != 0) note(r.errors, std::to_string(r.covered_returns) + " returns covered by an announcement");
  if (r.max_returned_per_call > 4 * B) {
    note(r.errors, "a deprecate returned " + std::to_string(r.max_returned_per_call) + " > 4B payloads");
  }
  if (o.extra_flush_phases >= 3 && r.outstanding_after_extra != 0) {
    note(r.errors, std::to_string(r.outstanding_after_extra) + " payloads still held after the extra flush phases");
  }
  return r;
}

PlateauResult tracker_plateau(const PlateauOptions& o) {
  const int P = o.threads;
  std::size_t batch = o.batch_size != 0 ? o.batch_size : default_batch_size(static_cast<std::size_t>(P));
  // One extra slot for the pinned announcement.
  RangeTracker tracker({static_cast<std::size_t>(P) + 1, batch});
  std::atomic<Timestamp> source{1};
  ProcessHandle pin = tracker.register_process();
  const Timestamp a = tracker.announce(pin, source);
  std::atomic<std::int64_t> quota{static_cast<std::int64_t>(o.needed)};
  std::atomic<std::uint64_t> max_out{0};
  std::atomic<std::uint64_t> samples{0};
  std::vector<ProcessHandle> handles;
  for (int t = 0; t < P; ++t) handles.push_back(tracker.register_process());

  auto worker = [&](int t) {
    auto& h = handles[static_cast<std::size_t>(t)];
    Timestamp last = a + 1;
    std::uint64_t mine = share_of(o.deprecates, P, t);
    for (std::uint64_t i = 0; i < mine; ++i) {
      Timestamp now = source.fetch_add(1) + 1;
      bool need = quota.fetch_sub(1) > 0;
      Timestamp low = need ? a : std::max(last, a + 1);
      last = std::max(last, now);
      tracker.deprecate(h, Payload{static_cast<std::uint64_t>(t) << 40 | i}, low, now);
      if (o.sample_every != 0 && i % o.sample_every == 0) {
        std::uint64_t out = tracker.counts().outstanding();
        std::uint64_t prev = max_out.load();
        while (out > prev && !max_out.compare_exchange_weak(prev, out)) {
        }
        samples.fetch_add(1);
      }
    }
  };
  std::vector<std::thread> threads;
  for (int t = 0; t < P; ++t) threads.emplace_back(worker, t);
  for (auto& th : threads) th.join();

  PlateauResult r;
  r.H = o.needed;
  r.P = P;
  r.final_outstanding = tracker.counts().outstanding();
  r.max_outstanding = std::max(max_out.load(), r.final_outstanding);
  r.samples = samples.load() + 1;
  double denom = static_cast<double>(P) * P * static_cast<double>(std::max<std::uint64_t>(1, ceil_log2(static_cast<std::uint64_t>(P))));
  double excess = static_cast<double>(r.max_outstanding) - 2.0 * static_cast<double>(r.H);
  r.c = std::max(0.0, excess / denom);
  tracker.unannounce(pin);
  return r;
}

// ---- version list ----

namespace {

// Blocks the thread at the first splice of the remove in progress.
class ParkObserver final : public probe::Observer {
 public:
  ParkObserver(PauseGate& gate, std::atomic<int>& idle) : gate_(gate), idle_(idle) {}

  void on_event(const probe::Event& e) override {
    if (parked_.load() || e.kind != probe::Kind::splice_call) return;
    parked_.store(true);
    idle_.fetch_add(1);
    gate_.leave();
    std::unique_lock lock(m_);
    cv_.wait(lock, [&] { return released_; });
  }

  bool parked() const { return parked_.load(); }

  void release() {
    std::lock_guard lock(m_);
    released_ = true;
    cv_.notify_all();
  }

 private:
  PauseGate& gate_;
  std::atomic<int>& idle_;
  std::atomic<bool> parked_{false};
  std::mutex m_;
  std::condition_variable cv_;
  bool released_ = false;
};

}  // namespace

ListStressResult list_stress(const ListStressOptions& o) {
  const int P = o.threads;
  const rc::LedgerSnapshot baseline = rc::ledger().snapshot();
  ListStressResult r;
  {
    std::vector<std::unique_ptr<VersionList>> lists;
    for (int i = 0; i < P * o.lists_per_thread; ++i) lists.push_back(std::make_unique<VersionList>(o.mode));
    boost::lockfree::queue<NodeBlock*> removable(1024);
    std::vector<Progress> progress(static_cast<std::size_t>(P));
    std::vector<ListStats> stats(static_cast<std::size_t>(P));
    std::vector<std::vector<std::string>> errors(static_cast<std::size_t>(P));
    PauseGate gate(P);
    std::atomic<int> idle{0};  // workers that finished or parked
    ParkObserver park(gate, idle);
    std::atomic<Timestamp> clock{1};

    auto worker = [&](int t) {
      auto ti = static_cast<std::size_t>(t);
      std::mt19937_64 rng(o.seed * 104729 + ti);
      std::uint64_t mine = share_of(o.appends, P, t);
      std::uint64_t appended = 0;
      std::uint64_t removed = 0;
      bool may_park = o.park_one && t == 0;
      bool left_gate = false;
      while (appended < mine) {
        gate.checkpoint();
        std::uint64_t burst = std::min<std::uint64_t>(1 + rng() % static_cast<std::uint64_t>(o.max_burst), mine - appended);
        for (std::uint64_t k = 0; k < burst; ++k) {
          auto& list = *lists[ti * static_cast<std::size_t>(o.lists_per_thread) + rng() % static_cast<std::size_t>(o.lists_per_thread)];
          NodeRef h = list.get_head();
          NodeRef x = make_node(static_cast<Value>(appended));
          if (!list.try_append(h, x)) note(errors[ti], "single appender lost a try_append");
          x->ts.store(clock.fetch_add(1));
          if (h.is_object()) {
            while (!removable.push(h.detach())) {
            }
          }
          progress[ti].a.store(++appended, std::memory_order_relaxed);
        }
        for (std::uint64_t k = 0; k < burst; ++k) {
          NodeBlock* b = nullptr;
          if (!removable.pop(b)) break;
          NodeRef n = NodeRef::adopt(b);
          if (may_park && removed >= o.park_after_removes) {
            probe::ScopedObserver install(&park);
            VersionList::remove(n);
            if (park.parked()) {
              left_gate = true;
              may_park = false;
            }
          } else {
            VersionList::remove(n);
          }
          progress[ti].b.store(++removed, std::memory_order_relaxed);
          if (left_gate) break;
        }
        if (left_gate) break;
      }
      stats[ti] = list_stats();
      if (!left_gate) {
        idle.fetch_add(1);
        gate.leave();
      }
    };

    std::vector<std::thread> threads;
    for (int t = 0; t < P; ++t) threads.emplace_back(worker, t);

    auto totals = [&] {
      std::uint64_t a = 0, b = 0;
      for (auto& p : progress) {
        a += p.a.load(std::memory_order_relaxed);
        b += p.b.load(std::memory_order_relaxed);
      }
      return std::pair{a, b};
    };
    auto measure = [&](std::uint64_t appends, std::uint64_t removes) {
      SpaceInputs in;
      for (auto& l : lists) in.lists.push_back(l.get());
      in.appends = appends;
      in.removes = removes;
      in.baseline = baseline;
      return measure_space(in);
    };
    auto record = [&](const SpaceMetrics& m) {
      r.samples.push_back(m);
      if (static_cast<std::int64_t>(m.lr_reachable) > m.live_vnodes) {
        note(r.errors, "lr_reachable " + std::to_string(m.lr_reachable) + " exceeds live vnodes " +
                           std::to_string(m.live_vnodes));
      }
      double denom = static_cast<double>(P) * static_cast<double>(std::max<std::uint64_t>(1, ceil_log2(m.L_max)));
      double excess = static_cast<double>(m.lr_reachable) - 2.0 * static_cast<double>(m.L - m.R);
      r.max_space_c = std::max(r.max_space_c, excess / denom);
    };

    if (o.sample_every != 0) {
      std::uint64_t next = o.sample_every;
      for (;;) {
        auto [a, b] = totals();
        bool all_done = idle.load() == P;
        if (a >= next || all_done) {
          gate.pause();
          auto [a2, b2] = totals();
          record(measure(a2, b2));
          gate.resume();
          next = a2 + o.sample_every;
        }
        if (all_done) break;
        std::this_thread::sleep_for(std::chrono::microseconds(200));
      }
    }
    // Wait for every unparked worker, then let the parked one finish.
    if (o.park_one) {
      while (idle.load() != P) std::this_thread::sleep_for(std::chrono::microseconds(200));
      r.parked = park.parked();
      park.release();
    }
    for (auto& th : threads) th.join();

    // Remove whatever is left, on this thread.
    ListStats before = list_stats();
    std::uint64_t extra_removes = 0;
    NodeBlock* b = nullptr;
    while (removable.pop(b)) {
      NodeRef n = NodeRef::adopt(b);
      VersionList::remove(n);
      ++extra_removes;
    }
    ListStats after = list_stats();

    auto [appends, removes] = totals();
    r.appends = appends;
    r.removes = removes + extra_removes;
    r.remove_rec_calls = after.remove_rec_calls - before.remove_rec_calls;
    r.max_depth_excess = after.max_depth_excess;
    r.max_depth = after.max_depth;
    for (auto& s : stats) {
      r.remove_rec_calls += s.remove_rec_calls;
      r.max_depth_excess = std::max(r.max_depth_excess, s.max_depth_excess);
      r.max_depth = std::max(r.max_depth, s.max_depth);
    }
    if (r.max_depth_excess > 0) note(r.errors, "a removeRec chain exceeded the removed node's priority");
    for (auto& e : errors) {
      for (auto& s : e) note(r.errors, s);
    }

    r.final_metrics = measure(r.appends, r.removes);
    record(r.final_metrics);
    std::uint64_t heads = 0;
    for (auto& l : lists) heads += l->head_field().peek() != nullptr ? 1 : 0;
    if (r.final_metrics.lr_reachable != heads || r.appends - r.removes != heads) {
      note(r.errors, "after removing all but the heads, lr_reachable is " +
                         std::to_string(r.final_metrics.lr_reachable) + " with " + std::to_string(heads) +
                         " heads and L-R = " + std::to_string(r.appends - r.removes));
    }
    for (auto& l : lists) l->retire();
  }
  rc::LedgerSnapshot end = rc::ledger().snapshot();
  if (end.live_vnodes != baseline.live_vnodes || end.live_descriptors != baseline.live_descriptors) {
    note(r.errors, "teardown leaked " + std::to_string(end.live_vnodes - baseline.live_vnodes) + " vnodes and " +
                       std::to_string(end.live_descriptors - baseline.live_descriptors) + " descriptors");
  }
  return r;
}

// ---- snapshot store ----

SnapshotStressResult snapshot_stress(const SnapshotStressOptions& o) {
  const int P = o.threads;
  const auto C = static_cast<std::size_t>(o.cells);
  const rc::LedgerSnapshot baseline = rc::ledger().snapshot();
  SnapshotStressResult r;
  {
    Camera camera({static_cast<std::size_t>(P) + 1, 0});
    std::vector<std::unique_ptr<VersionedCAS>> cells;
    for (std::size_t i = 0; i < C; ++i) cells.push_back(std::make_unique<VersionedCAS>(0, camera, o.mode));
    std::vector<std::atomic<Value>> floors(C);
    std::vector<ProcessHandle> handles;
    for (int t = 0; t <= P; ++t) handles.push_back(camera.register_process());
    std::vector<Progress> progress(static_cast<std::size_t>(P));
    struct Counts {
      std::uint64_t updates = 0, ok = 0, snapshots = 0, finds = 0, fwd = 0, up = 0;
    };
    std::vector<Counts> counts(static_cast<std::size_t>(P));
    std::vector<std::vector<std::string>> errors(static_cast<std::size_t>(P));
    PauseGate gate(P);

    auto worker = [&](int t) {
      auto ti = static_cast<std::size_t>(t);
      auto& h = handles[ti];
      auto& c = counts[ti];
      std::mt19937_64 rng(o.seed * 15485863 + ti);
      std::vector<Value> lo(C), prev(C, 0);
      std::uint64_t mine = share_of(o.ops, P, t);
      for (std::uint64_t i = 0; i < mine; ++i) {
        gate.checkpoint();
        if (static_cast<int>(rng() % 100) < o.snapshot_percent) {
          for (std::size_t k = 0; k < C; ++k) lo[k] = floors[k].load();
          Timestamp ts = camera.take_snapshot(h);
          for (std::size_t k = 0; k < C; ++k) {
            FindTrace trace;
            Value v = cells[k]->read_version(ts, &trace);
            ++c.finds;
            for (const auto& s : trace.steps) (s.via_right ? c.up : c.fwd)++;
            if (auto viol = check_find_trace(trace)) note(errors[ti], viol->message);
            Value hi = cells[k]->v_read();
            if (v < lo[k] || v > hi) {
              note(errors[ti], "cell " + std::to_string(k) + " snapshot value " + std::to_string(v) +
                                   " outside [" + std::to_string(lo[k]) + ", " + std::to_string(hi) + "]");
            }
            if (v < prev[k]) note(errors[ti], "cell " + std::to_string(k) + " went backwards across snapshots");
            prev[k] = v;
          }
          camera.unreserve(h);
          ++c.snapshots;
        } else {
          std::size_t k = rng() % C;
          Value cur = cells[k]->v_read();
          ++c.updates;
          if (cells[k]->v_cas(h, cur, cur + 1)) {
            ++c.ok;
            Value f = floors[k].load();
            while (f < cur + 1 && !floors[k].compare_exchange_weak(f, cur + 1)) {
            }
          }
        }
        progress[ti].a.store(i + 1, std::memory_order_relaxed);
      }
      gate.leave();
    };

    std::vector<std::thread> threads;
    for (int t = 0; t < P; ++t) threads.emplace_back(worker, t);

    auto done_ops = [&] {
      std::uint64_t n = 0;
      for (auto& p : progress) n += p.a.load(std::memory_order_relaxed);
      return n;
    };
    auto quiescent_check = [&] {
      auto& h = handles[static_cast<std::size_t>(P)];
      Timestamp ts = camera.take_snapshot(h);
      for (std::size_t k = 0; k < C; ++k) {
        Value snap = cells[k]->read_version(ts);
        Value now = cells[k]->v_read();
        if (snap != now || now != floors[k].load()) {
          note(r.errors, "quiescent check on cell " + std::to_string(k) + ": snapshot " + std::to_string(snap) +
                             ", current " + std::to_string(now) + ", committed " + std::to_string(floors[k].load()));
        }
      }
      camera.unreserve(h);
      ++r.quiescent_checks;
    };
    std::uint64_t step = o.quiescent_checks > 0 ? o.ops / static_cast<std::uint64_t>(o.quiescent_checks + 1) : 0;
    std::uint64_t next = step;
    while (step != 0 && done_ops() < o.ops) {
      if (done_ops() >= next) {
        gate.pause();
        quiescent_check();
        gate.resume();
        next += step;
      }
      std::this_thread::sleep_for(std::chrono::microseconds(200));
    }
    for (auto& th : threads) th.join();
    quiescent_check();

    for (std::size_t t = 0; t < counts.size(); ++t) {
      r.updates += counts[t].updates;
      r.successful_updates += counts[t].ok;
      r.snapshots += counts[t].snapshots;
      r.finds += counts[t].finds;
      r.forward_steps += counts[t].fwd;
      r.upward_steps += counts[t].up;
      for (auto& e : errors[t]) note(r.errors, e);
    }
    handles.clear();
    camera.drain();
    StoreCounts sc = camera.counts();
    if (sc.vnodes_deprecated != sc.vnodes_removed) {
      note(r.errors, "drain left " + std::to_string(sc.vnodes_deprecated - sc.vnodes_removed) + " versions held");
    }
    cells.clear();
  }
  rc::LedgerSnapshot end = rc::ledger().snapshot();
  if (end.live_vnodes != baseline.live_vnodes || end.live_descriptors != baseline.live_descriptors) {
    note(r.errors, "teardown leaked " + std::to_string(end.live_vnodes - baseline.live_vnodes) + " vnodes");
  }
  return r;
}

}  // namespace mvgc::verify
