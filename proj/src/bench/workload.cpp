#include "mvgc/bench/workload.hpp"

#include <barrier>
#include <bit>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

#include "mvgc/counted.hpp"
#include "mvgc/probe.hpp"
#include "mvgc/snapshot_store.hpp"
#include "mvgc/verify/trace.hpp"
#include "mvgc/version_list.hpp"

namespace mvgc::bench {

namespace {

constexpr Value kAbsent = -1;

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void fold(std::uint64_t& digest, std::int64_t v) { digest = mix(digest ^ static_cast<std::uint64_t>(v)); }

std::uint64_t share_of(std::uint64_t total, int threads, int t) {
  auto n = static_cast<std::uint64_t>(threads);
  auto i = static_cast<std::uint64_t>(t);
  return total / n + (i < total % n ? 1 : 0);
}

std::mutex event_stream_mutex;

class StepCounter final : public probe::Observer {
 public:
  StepCounter(int thread, bool stream) : thread_(thread), stream_(stream) {}

  void on_event(const probe::Event& e) override {
    if (probe::is_step(e.kind)) ++steps;
    if (!stream_) return;
    std::lock_guard lock(event_stream_mutex);
    std::fprintf(stderr,
                 "{\"thread\":%d,\"kind\":\"%s\",\"field\":\"%s\",\"object\":%llu,\"a\":%lld,\"b\":%lld,"
                 "\"c\":%lld,\"d\":%lld,\"ok\":%s}\n",
                 thread_, std::string(verify::kind_name(e.kind)).c_str(),
                 std::string(verify::field_name(e.field)).c_str(), static_cast<unsigned long long>(e.object),
                 static_cast<long long>(e.a), static_cast<long long>(e.b), static_cast<long long>(e.c),
                 static_cast<long long>(e.d), e.ok ? "true" : "false");
  }

  std::uint64_t steps = 0;

 private:
  int thread_;
  bool stream_;
};

struct alignas(64) WorkerState {
  std::uint64_t done = 0;
  std::uint64_t appends = 0;
  std::uint64_t removes = 0;
  std::uint64_t digest = 0;
  std::uint64_t ops[kOpClasses] = {0, 0, 0};
  std::uint64_t keys_read = 0;
  StepHistogram steps[kOpClasses];
};

struct ListCounts {
  std::uint64_t appends, removes;
};

ListCounts my_list_counts() {
  const ListStats& s = list_stats();
  return {s.appends, s.removes};
}

}  // namespace

std::string validate(const WorkloadSpec& s) {
  if (s.threads < 1) return "threads must be at least 1";
  if (!(s.update_ratio >= 0 && s.update_ratio <= 1)) return "update ratio must lie in [0, 1]";
  if (!(s.snapshot_ratio >= 0 && s.snapshot_ratio <= 1)) return "snapshot ratio must lie in [0, 1]";
  if (s.update_ratio + s.snapshot_ratio > 1 + 1e-12) return "update and snapshot ratios must sum to at most 1";
  if (s.keys < static_cast<std::uint32_t>(s.threads)) return "need at least one key per thread";
  if (s.query_length > s.keys) return "query length exceeds the key count";
  return {};
}

const char* op_class_name(OpClass c) {
  switch (c) {
    case OpClass::update: return "update";
    case OpClass::snapshot: return "snapshot";
    case OpClass::read: return "read";
  }
  return "?";
}

void StepHistogram::add(std::uint64_t steps) {
  ++buckets[std::bit_width(steps)];
  total += steps;
  max = std::max(max, steps);
}

void StepHistogram::merge(const StepHistogram& other) {
  for (auto [k, n] : other.buckets) buckets[k] += n;
  total += other.total;
  max = std::max(max, other.max);
}

MetricsReport run(const WorkloadSpec& spec) {
  MetricsReport rep;
  rep.spec = spec;
  rep.steps_instrumented = MVGC_INSTRUMENT != 0;
  if (std::string err = validate(spec); !err.empty()) {
    rep.violations.push_back("invalid workload: " + err);
    return rep;
  }
  const int P = spec.threads;
  const rc::LedgerSnapshot baseline = rc::ledger().snapshot();
  const ListCounts main_start = my_list_counts();
  auto start_time = std::chrono::steady_clock::now();

  {
    Camera camera({static_cast<std::size_t>(P) + (spec.hold_snapshot ? 1 : 0), 0});
    VersionedMap map(camera, spec.keys, spec.mode);
    std::vector<Value> shadow(spec.keys, kAbsent);
    std::vector<WorkerState> state(static_cast<std::size_t>(P));
    std::vector<ProcessHandle> handles;
    for (int t = 0; t < P; ++t) handles.push_back(camera.register_process());
    std::optional<ProcessHandle> driver;
    if (spec.hold_snapshot) {
      driver.emplace(camera.register_process());
      camera.take_snapshot(*driver);
    }
    const ListCounts main_after_setup = my_list_counts();
    const std::uint64_t handle_count = static_cast<std::uint64_t>(P) + (spec.hold_snapshot ? 1 : 0);

    auto measure = [&](std::uint64_t main_appends, std::uint64_t main_removes) {
      verify::SpaceInputs in;
      in.lists = map.lists();
      in.tracker = &camera.tracker();
      in.appends = main_appends;
      in.removes = main_removes;
      for (const auto& w : state) {
        in.appends += w.appends;
        in.removes += w.removes;
      }
      in.handles = handle_count;
      in.dnodes_necessary = in.lists.size() - spec.keys;
      in.baseline = baseline;
      return verify::measure_space(in);
    };
    auto check_shadow = [&](const char* where) {
      for (std::uint32_t k = 0; k < spec.keys; ++k) {
        Value got = map.get(k).value_or(kAbsent);
        if (got != shadow[k]) {
          rep.violations.push_back(std::string(where) + ": key " + std::to_string(k) + " reads " +
                                   std::to_string(got) + ", expected " + std::to_string(shadow[k]));
          return;
        }
      }
    };

    std::mutex sample_mutex;
    auto on_phase = [&]() noexcept {
      try {
        Sample s;
        for (const auto& w : state) s.ops += w.done;
        s.space = measure(main_after_setup.appends - main_start.appends,
                          main_after_setup.removes - main_start.removes);
        if (static_cast<std::int64_t>(s.space.lr_reachable) > s.space.live_vnodes) {
          rep.violations.push_back("sample at " + std::to_string(s.ops) + " ops: more lr-reachable nodes than live ones");
        }
        check_shadow("sample");
        std::lock_guard lock(sample_mutex);
        rep.samples.push_back(s);
      } catch (const std::exception& e) {
        rep.violations.push_back(std::string("sampling failed: ") + e.what());
      }
    };
    std::barrier phase_barrier(P, on_phase);
    const std::uint64_t phase =
        spec.sample_every == 0 ? 0 : (spec.sample_every + static_cast<std::uint64_t>(P) - 1) / static_cast<std::uint64_t>(P);
    const auto update_cut = static_cast<std::uint64_t>(spec.update_ratio * 1'000'000.0);
    const auto snapshot_cut = update_cut + static_cast<std::uint64_t>(spec.snapshot_ratio * 1'000'000.0);

    auto worker = [&](int t) {
      WorkerState& w = state[static_cast<std::size_t>(t)];
      ProcessHandle& h = handles[static_cast<std::size_t>(t)];
      std::seed_seq seq{spec.seed, static_cast<std::uint64_t>(t)};
      std::mt19937_64 rng(seq);
      StepCounter counter(t, spec.debug_events);
      probe::ScopedObserver scoped(&counter);
      const ListCounts base = my_list_counts();
      auto publish = [&] {
        ListCounts now = my_list_counts();
        w.appends = now.appends - base.appends;
        w.removes = now.removes - base.removes;
      };
      // Thread t owns the keys congruent to t.
      const std::uint64_t owned = (spec.keys - static_cast<std::uint32_t>(t) + static_cast<std::uint32_t>(P) - 1) /
                                  static_cast<std::uint32_t>(P);
      const std::uint64_t quota = share_of(spec.ops, P, t);
      for (std::uint64_t i = 0; i < quota; ++i) {
        std::uint64_t dice = rng() % 1'000'000;
        counter.steps = 0;
        OpClass cls;
        if (dice < update_cut) {
          cls = OpClass::update;
          auto key = static_cast<std::uint32_t>(t + static_cast<int>(rng() % owned) * P);
          if (shadow[key] != kAbsent && rng() % 8 == 0) {
            map.erase(h, key);
            shadow[key] = kAbsent;
            fold(w.digest, -2);
          } else {
            auto v = static_cast<Value>(rng() >> 16);
            map.put(h, key, v);
            shadow[key] = v;
            fold(w.digest, v);
          }
        } else if (dice < snapshot_cut) {
          cls = OpClass::snapshot;
          auto first = static_cast<std::uint32_t>(rng() % spec.keys);
          SnapshotView view(map, h);
          for (std::uint32_t j = 0; j < spec.query_length; ++j) {
            fold(w.digest, view.get((first + j) % spec.keys).value_or(kAbsent));
          }
          w.keys_read += view.reads();
        } else {
          // Frontier reads stay on owned keys: erase frees entries at once,
          // so only the owner may read them without a snapshot.
          cls = OpClass::read;
          auto key = static_cast<std::uint32_t>(t + static_cast<int>(rng() % owned) * P);
          fold(w.digest, map.get(key).value_or(kAbsent));
        }
        ++w.ops[static_cast<int>(cls)];
        w.steps[static_cast<int>(cls)].add(counter.steps);
        w.done = i + 1;
        if (phase != 0 && (i + 1) % phase == 0 && i + 1 < quota) {
          publish();
          phase_barrier.arrive_and_wait();
        }
      }
      publish();
      if (phase != 0) phase_barrier.arrive_and_drop();
    };

    std::vector<std::thread> threads;
    for (int t = 0; t < P; ++t) threads.emplace_back(worker, t);
    for (auto& th : threads) th.join();
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();

    if (driver) camera.unreserve(*driver);
    camera.drain();
    const ListCounts main_end = my_list_counts();
    rep.final_space = measure(main_end.appends - main_start.appends, main_end.removes - main_start.removes);
    for (const VersionList* list : map.lists()) {
      if (rc::is_object(list->head_field().peek())) ++rep.live_lists;
    }
    check_shadow("final");
    if (spec.mode == ReclaimMode::reclaiming) {
      const auto& f = rep.final_space;
      if (f.lr_reachable != rep.live_lists || f.L - f.R != rep.live_lists) {
        rep.violations.push_back("after the drain: lr_reachable " + std::to_string(f.lr_reachable) + ", L-R " +
                                 std::to_string(f.L - f.R) + ", live current versions " +
                                 std::to_string(rep.live_lists));
      }
      if (f.outstanding_deprecated != 0) {
        rep.violations.push_back("after the drain: tracker still holds " + std::to_string(f.outstanding_deprecated));
      }
    }

    std::uint64_t digest = 0;
    for (const auto& w : state) {
      fold(digest, static_cast<std::int64_t>(w.digest));
      for (int c = 0; c < kOpClasses; ++c) {
        rep.ops[c] += w.ops[c];
        rep.steps[c].merge(w.steps[c]);
      }
      rep.keys_read += w.keys_read;
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(digest));
    rep.results_digest = hex;
  }

  const rc::LedgerSnapshot end = rc::ledger().snapshot();
  if (end.live_vnodes != baseline.live_vnodes || end.live_descriptors != baseline.live_descriptors) {
    rep.violations.push_back("leak at teardown: " + std::to_string(end.live_vnodes - baseline.live_vnodes) +
                             " vnodes, " + std::to_string(end.live_descriptors - baseline.live_descriptors) +
                             " descriptors");
  }
  return rep;
}

nlohmann::json MetricsReport::to_json(bool with_timing) const {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["workload"] = {{"threads", spec.threads},
                   {"ops", spec.ops},
                   {"update_ratio", spec.update_ratio},
                   {"snapshot_ratio", spec.snapshot_ratio},
                   {"query_length", spec.query_length},
                   {"keys", spec.keys},
                   {"seed", spec.seed},
                   {"mode", spec.mode == ReclaimMode::baseline ? "baseline" : "reclaiming"},
                   {"sample_every", spec.sample_every},
                   {"hold_snapshot", spec.hold_snapshot}};
  nlohmann::json classes = nlohmann::json::object();
  for (int c = 0; c < kOpClasses; ++c) {
    const StepHistogram& h = steps[c];
    nlohmann::json buckets = nlohmann::json::array();
    for (auto [k, n] : h.buckets) {
      std::uint64_t lo = k == 0 ? 0 : std::uint64_t{1} << (k - 1);
      std::uint64_t hi = k == 0 ? 0 : (std::uint64_t{1} << k) - 1;
      buckets.push_back({{"min_steps", lo}, {"max_steps", hi}, {"count", n}});
    }
    classes[op_class_name(static_cast<OpClass>(c))] = {
        {"count", ops[c]}, {"steps_total", h.total}, {"steps_max", h.max}, {"step_histogram", buckets}};
  }
  j["operations"] = classes;
  j["snapshot_keys_read"] = keys_read;
  j["steps_instrumented"] = steps_instrumented;
  nlohmann::json series = nlohmann::json::array();
  for (const Sample& s : samples) {
    nlohmann::json m = s.space.to_json();
    m["ops"] = s.ops;
    series.push_back(m);
  }
  j["space_samples"] = series;
  j["final_space"] = final_space.to_json();
  j["live_lists"] = live_lists;
  j["results_digest"] = results_digest;
  j["violations"] = violations;
  j["pass"] = ok();
  if (with_timing) {
    nlohmann::json t = {{"seconds", seconds}};
    for (int c = 0; c < kOpClasses; ++c) {
      t[std::string(op_class_name(static_cast<OpClass>(c))) + "_per_second"] =
          seconds > 0 ? static_cast<double>(ops[c]) / seconds : 0.0;
    }
    j["timing"] = t;
  }
  return j;
}

std::string MetricsReport::to_csv(bool with_timing) const {
  std::ostringstream out;
  out << "# schema_version=" << kSchemaVersion << '\n';
  out << "# results_digest=" << results_digest << '\n';
  for (int c = 0; c < kOpClasses; ++c) {
    const char* name = op_class_name(static_cast<OpClass>(c));
    out << "# " << name << "_count=" << ops[c] << '\n';
    out << "# " << name << "_steps_total=" << steps[c].total << '\n';
    out << "# " << name << "_steps_max=" << steps[c].max << '\n';
  }
  out << "# pass=" << (ok() ? "true" : "false") << '\n';
  if (with_timing) out << "# seconds=" << seconds << '\n';
  out << "sample,ops,L,R,L_max,lr_reachable,outstanding_deprecated,H,K,D,V,live_vnodes,live_descriptors\n";
  auto row = [&](const std::string& label, std::uint64_t n, const verify::SpaceMetrics& m) {
    out << label << ',' << n << ',' << m.L << ',' << m.R << ',' << m.L_max << ',' << m.lr_reachable << ','
        << m.outstanding_deprecated << ',' << m.H << ',' << m.K << ',' << m.D << ',' << m.V << ',' << m.live_vnodes
        << ',' << m.live_descriptors << '\n';
  };
  for (std::size_t i = 0; i < samples.size(); ++i) row(std::to_string(i), samples[i].ops, samples[i].space);
  std::uint64_t total = ops[0] + ops[1] + ops[2];
  row("final", total, final_space);
  return out.str();
}

}  // namespace mvgc::bench
