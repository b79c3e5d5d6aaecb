// Workload driver for the snapshot store.
//
//   mvgc_bench --threads 8 --ops 1000000 --update-ratio 0.5 --snapshot-ratio 0.05 \
//              --query-length 64 --sample-every 100000
//
// Prints a JSON report (or CSV with --format csv). Exit status: 0 success,
// 1 violation detected, 2 usage error. MVGC_DEBUG_EVENTS=1 streams every
// probe event to stderr as JSON lines.

#include <CLI11.hpp>

#include <cstdlib>
#include <cstring>
#include <iostream>

#include "mvgc/bench/workload.hpp"

using namespace mvgc;

int main(int argc, char** argv) {
  CLI::App app{"Mixed update and snapshot-query workload with space sampling"};
  bench::WorkloadSpec spec;
  std::string mode_name = "reclaiming";
  std::string format = "json";
  bool no_timing = false;

  app.add_option("--threads", spec.threads, "worker threads")->check(CLI::Range(1, 256));
  app.add_option("--ops", spec.ops, "operations over all workers");
  app.add_option("--update-ratio", spec.update_ratio, "fraction of updates")->check(CLI::Range(0.0, 1.0));
  app.add_option("--snapshot-ratio", spec.snapshot_ratio, "fraction of snapshot queries")->check(CLI::Range(0.0, 1.0));
  app.add_option("--query-length", spec.query_length, "keys read per snapshot query");
  app.add_option("--keys", spec.keys, "size of the keyspace")->check(CLI::Range(1u, 1u << 24));
  app.add_option("--seed", spec.seed);
  app.add_option("--mode", mode_name, "baseline or reclaiming")->check(CLI::IsMember({"baseline", "reclaiming"}));
  app.add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--sample-every", spec.sample_every, "operations between space samples (0: final only)");
  app.add_flag("--hold-snapshot", spec.hold_snapshot, "keep one snapshot open for the whole run");
  app.add_flag("--no-timing", no_timing, "omit wall-clock figures so reports compare byte for byte");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  spec.mode = mode_name == "baseline" ? ReclaimMode::baseline : ReclaimMode::reclaiming;
  if (const char* env = std::getenv("MVGC_DEBUG_EVENTS")) spec.debug_events = std::strcmp(env, "1") == 0;
  if (std::string err = bench::validate(spec); !err.empty()) {
    std::cerr << "invalid workload: " << err << '\n';
    return 2;
  }

  bench::MetricsReport rep = bench::run(spec);
  if (format == "csv") {
    std::cout << rep.to_csv(!no_timing);
  } else {
    std::cout << rep.to_json(!no_timing).dump(2) << '\n';
  }
  for (const auto& v : rep.violations) std::cerr << "violation: " << v << '\n';
  return rep.ok() ? 0 : 1;
}
