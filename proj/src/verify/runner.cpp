#include "mvgc/verify/runner.hpp"

#include <ucontext.h>

#include <exception>
#include <random>

#include "mvgc/verify/invariants.hpp"

namespace mvgc::verify {

std::size_t Context::invoke(std::string name, std::vector<std::int64_t> args) {
  Operation op;
  op.process = process_;
  op.name = std::move(name);
  op.args = std::move(args);
  op.invoke = ++*clock_;
  history_.ops.push_back(std::move(op));
  if (process_ >= 0) current_op_[static_cast<std::size_t>(process_)] = next_op_[static_cast<std::size_t>(process_)]++;
  return history_.ops.size() - 1;
}

void Context::respond(std::size_t op, std::vector<std::int64_t> result) {
  auto& o = history_.ops.at(op);
  o.result = std::move(result);
  o.response = ++*clock_;
  o.completed = true;
  if (process_ >= 0) current_op_[static_cast<std::size_t>(process_)] = -1;
}

void Context::set_result(std::size_t op, std::vector<std::int64_t> result) {
  history_.ops.at(op).result = std::move(result);
}

std::int64_t Context::identity(std::int64_t raw_uid) { return normalizer_->map(raw_uid); }

namespace {

constexpr std::size_t kStackSize = 256 * 1024;

}  // namespace

// One execution: owns the fibers, the observer and the recorded data.
class Execution final : public probe::Observer {
 public:
  Execution(Scenario& scenario, const Schedule& schedule, const RunOptions& options)
      : scenario_(scenario), schedule_(schedule), options_(options), rng_(schedule.seed) {
    int n = scenario.num_processes();
    fibers_.resize(static_cast<std::size_t>(n));
    ctx_.next_op_.assign(static_cast<std::size_t>(n), 0);
    ctx_.current_op_.assign(static_cast<std::size_t>(n), -1);
    ctx_.clock_ = &clock_;
    ctx_.normalizer_ = &normalizer_;
  }

  RunResult run() {
    probe::ScopedObserver install(this);
    scenario_.setup(ctx_);
    for (std::size_t i = 0; i < fibers_.size(); ++i) start_fiber(i);

    for (std::size_t choice = 0;; ++choice) {
      std::vector<int> enabled;
      for (std::size_t i = 0; i < fibers_.size(); ++i) {
        if (!fibers_[i].done) enabled.push_back(static_cast<int>(i));
      }
      if (enabled.empty()) break;
      if (choice >= options_.max_choices) throw ScheduleError("execution exceeded max_choices");
      int p = 0;
      try {
        p = pick(choice, enabled);
      } catch (const ScheduleError&) {
        // Let every process finish so no fiber is abandoned holding
        // references, then report the bad schedule.
        for (int q : enabled) {
          while (!fibers_[static_cast<std::size_t>(q)].done) resume(static_cast<std::size_t>(q));
        }
        throw;
      }
      ChoicePoint cp;
      if (choice < options_.record_enabled_up_to) cp.enabled = enabled;
      cp.chosen = p;
      result_.choices.push_back(std::move(cp));
      resume(static_cast<std::size_t>(p));
      if (error_) std::rethrow_exception(error_);
    }

    ctx_.process_ = -1;
    result_.finish_failure = scenario_.finish(ctx_);
    result_.history = std::move(ctx_.history_);
    return std::move(result_);
  }

  void on_event(const probe::Event& event) override {
    TraceEvent te;
    te.process = ctx_.process_;
    te.op = ctx_.process_ >= 0 ? ctx_.current_op_[static_cast<std::size_t>(ctx_.process_)] : -1;
    te.time = ++clock_;
    te.event = normalizer_.apply(event);
    result_.trace.events.push_back(te);
    if (ctx_.process_ >= 0 && probe::is_step(event.kind)) yield();
  }

 private:
  struct Fiber {
    ucontext_t ctx{};
    std::unique_ptr<char[]> stack;
    bool done = false;
  };

  static void entry(unsigned lo, unsigned hi) {
    auto bits = (static_cast<std::uintptr_t>(hi) << 32) | static_cast<std::uintptr_t>(lo);
    auto* self = reinterpret_cast<Execution*>(bits);
    std::size_t p = self->starting_;
    try {
      self->scenario_.run(static_cast<int>(p), self->ctx_);
    } catch (...) {
      self->error_ = std::current_exception();
    }
    self->fibers_[p].done = true;
    // Returning switches to uc_link (the driver).
  }

  void start_fiber(std::size_t p) {
    Fiber& f = fibers_[p];
    f.stack = std::make_unique<char[]>(kStackSize);
    getcontext(&f.ctx);
    f.ctx.uc_stack.ss_sp = f.stack.get();
    f.ctx.uc_stack.ss_size = kStackSize;
    f.ctx.uc_link = &driver_;
    auto bits = reinterpret_cast<std::uintptr_t>(this);
    makecontext(&f.ctx, reinterpret_cast<void (*)()>(&Execution::entry), 2,
                static_cast<unsigned>(bits & 0xffffffffu), static_cast<unsigned>(bits >> 32));
  }

  void resume(std::size_t p) {
    ctx_.process_ = static_cast<int>(p);
    starting_ = p;
    swapcontext(&driver_, &fibers_[p].ctx);
    ctx_.process_ = -1;
  }

  void yield() {
    auto p = static_cast<std::size_t>(ctx_.process_);
    swapcontext(&fibers_[p].ctx, &driver_);
  }

  int pick(std::size_t choice, const std::vector<int>& enabled) {
    if (choice < schedule_.steps.size()) {
      int p = schedule_.steps[choice];
      if (p < 0 || static_cast<std::size_t>(p) >= fibers_.size()) {
        throw ScheduleError("schedule step " + std::to_string(choice) + " names unregistered process " +
                            std::to_string(p));
      }
      if (fibers_[static_cast<std::size_t>(p)].done) {
        throw ScheduleError("schedule step " + std::to_string(choice) + " names finished process " +
                            std::to_string(p));
      }
      return p;
    }
    if (schedule_.seed == 0) return enabled.front();
    std::uniform_int_distribution<std::size_t> d(0, enabled.size() - 1);
    return enabled[d(rng_)];
  }

  Scenario& scenario_;
  const Schedule& schedule_;
  const RunOptions& options_;
  std::mt19937_64 rng_;
  std::vector<Fiber> fibers_;
  ucontext_t driver_{};
  std::size_t starting_ = 0;
  std::exception_ptr error_;
  Context ctx_;
  std::uint64_t clock_ = 0;
  UidNormalizer normalizer_;
  RunResult result_;
};

namespace {

struct Instance {
  std::unique_ptr<Scenario> scenario;
  RunResult run;
};

Instance execute(const ScenarioFactory& factory, const Schedule& schedule, const RunOptions& options) {
  Instance inst;
  inst.scenario = factory();
  Execution exec(*inst.scenario, schedule, options);
  inst.run = exec.run();
  return inst;
}

}  // namespace

RunResult run_schedule(const ScenarioFactory& factory, const Schedule& schedule,
                       const RunOptions& options) {
  return execute(factory, schedule, options).run;
}

std::optional<Violation> default_check(const Scenario& scenario, const RunResult& run) {
  if (auto v = check_invariants(run.trace).first_violation()) return v;
  if (run.finish_failure) {
    return Violation{"end_state", *run.finish_failure, run.trace.events.size()};
  }
  if (auto oracle = scenario.oracle()) {
    auto lin = check_linearizable(run.history, *oracle);
    if (!lin.ok) return Violation{"linearizability", "no legal linearization", run.trace.events.size()};
  }
  return std::nullopt;
}

std::optional<Violation> check_schedule(const ScenarioFactory& factory, const Schedule& schedule,
                                        const Checker& check) {
  Instance inst = execute(factory, schedule, {});
  return check(*inst.scenario, inst.run);
}

Schedule minimize_schedule(const ScenarioFactory& factory, const Schedule& failing,
                           const std::string& invariant, const Checker& check) {
  auto still_fails = [&](const Schedule& s) {
    try {
      auto v = check_schedule(factory, s, check);
      return v && v->invariant == invariant;
    } catch (const ScheduleError&) {
      return false;
    }
  };
  Schedule best = failing;
  // Shortest prefix that still fails under the default completion.
  std::size_t lo = 0, hi = best.steps.size();
  while (lo < hi) {
    std::size_t mid = (lo + hi) / 2;
    Schedule s{best.seed, {best.steps.begin(), best.steps.begin() + static_cast<std::ptrdiff_t>(mid)}};
    if (still_fails(s)) hi = mid; else lo = mid + 1;
  }
  if (hi < best.steps.size()) {
    Schedule s{best.seed, {best.steps.begin(), best.steps.begin() + static_cast<std::ptrdiff_t>(hi)}};
    if (still_fails(s)) best = s;
  }
  // Then drop single steps until no removal keeps the failure.
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < best.steps.size(); ++i) {
      Schedule s = best;
      s.steps.erase(s.steps.begin() + static_cast<std::ptrdiff_t>(i));
      if (still_fails(s)) {
        best = std::move(s);
        changed = true;
        break;
      }
    }
  }
  return best;
}

namespace {

Schedule explicit_schedule(const RunResult& run, std::uint64_t seed) {
  Schedule s{seed, {}};
  for (const auto& c : run.choices) s.steps.push_back(c.chosen);
  return s;
}

}  // namespace

ExploreResult explore(const ScenarioFactory& factory, const ExploreOptions& options,
                      const Checker& check) {
  ExploreResult out;
  RunOptions ro;
  ro.record_enabled_up_to = options.depth;
  Schedule prefix{0, {}};
  for (;;) {
    if (options.max_schedules != 0 && out.schedules >= options.max_schedules) {
      out.complete = false;
      return out;
    }
    Instance inst = execute(factory, prefix, ro);
    ++out.schedules;
    out.events += inst.run.trace.events.size();
    out.max_choices = std::max(out.max_choices, inst.run.choices.size());
    if (auto v = check(*inst.scenario, inst.run)) {
      Failure f;
      f.violation = *v;
      f.original = explicit_schedule(inst.run, 0);
      f.schedule = options.minimize ? minimize_schedule(factory, f.original, v->invariant, check)
                                    : f.original;
      out.failure = std::move(f);
      return out;
    }
    // Backtrack to the deepest choice point with an untried alternative.
    const auto& cps = inst.run.choices;
    std::size_t limit = std::min(options.depth, cps.size());
    bool advanced = false;
    for (std::size_t i = limit; i-- > 0;) {
      const auto& en = cps[i].enabled;
      auto it = std::find(en.begin(), en.end(), cps[i].chosen);
      if (it + 1 != en.end()) {
        prefix.steps.clear();
        for (std::size_t j = 0; j < i; ++j) prefix.steps.push_back(cps[j].chosen);
        prefix.steps.push_back(*(it + 1));
        advanced = true;
        break;
      }
    }
    if (!advanced) return out;
  }
}

ExploreResult explore_random(const ScenarioFactory& factory, std::uint64_t first_seed,
                             std::size_t count, const Checker& check, bool minimize) {
  ExploreResult out;
  RunOptions ro;
  ro.record_enabled_up_to = 0;
  for (std::size_t k = 0; k < count; ++k) {
    Schedule s{first_seed + k == 0 ? 1 : first_seed + k, {}};
    Instance inst = execute(factory, s, ro);
    ++out.schedules;
    out.events += inst.run.trace.events.size();
    out.max_choices = std::max(out.max_choices, inst.run.choices.size());
    if (auto v = check(*inst.scenario, inst.run)) {
      Failure f;
      f.violation = *v;
      f.original = explicit_schedule(inst.run, 0);
      f.schedule = minimize ? minimize_schedule(factory, f.original, v->invariant, check) : f.original;
      out.failure = std::move(f);
      return out;
    }
  }
  return out;
}

}  // namespace mvgc::verify
