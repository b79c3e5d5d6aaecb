#pragma once

// Mixed workload over a VersionedMap: point updates on keys owned by each
// worker, point reads, and snapshot range queries. Space metrics are sampled
// at lockstep barriers where every worker is between operations.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvgc/types.hpp"
#include "mvgc/verify/space.hpp"

namespace mvgc::bench {

inline constexpr int kSchemaVersion = 1;

struct WorkloadSpec {
  int threads = 1;
  std::uint64_t ops = 100'000;  // total over all workers
  double update_ratio = 0.5;
  double snapshot_ratio = 0.05;  // the rest are point reads
  std::uint32_t query_length = 64;
  std::uint32_t keys = 1024;
  std::uint64_t seed = 1;
  ReclaimMode mode = ReclaimMode::reclaiming;
  std::uint64_t sample_every = 0;  // ops between samples; 0: final sample only
  // The driver holds one snapshot taken before the workers start until they
  // finish.
  bool hold_snapshot = false;
  bool debug_events = false;  // write every probe event to stderr
};

// Empty if valid, else a description of the first problem.
std::string validate(const WorkloadSpec& spec);

enum class OpClass { update, snapshot, read };
inline constexpr int kOpClasses = 3;
const char* op_class_name(OpClass c);

struct StepHistogram {
  // bucket k holds operations with steps in [2^(k-1), 2^k); bucket 0 holds 0
  std::map<int, std::uint64_t> buckets;
  std::uint64_t total = 0;
  std::uint64_t max = 0;

  void add(std::uint64_t steps);
  void merge(const StepHistogram& other);
};

struct Sample {
  std::uint64_t ops = 0;  // completed operations at the sample
  verify::SpaceMetrics space;
};

struct MetricsReport {
  WorkloadSpec spec;
  std::uint64_t ops[kOpClasses] = {0, 0, 0};
  std::uint64_t keys_read = 0;  // by snapshot queries
  StepHistogram steps[kOpClasses];
  bool steps_instrumented = false;
  std::vector<Sample> samples;
  verify::SpaceMetrics final_space;  // after the drain
  std::uint64_t live_lists = 0;      // lists with a current version, after the drain
  std::string results_digest;
  std::vector<std::string> violations;
  double seconds = 0;

  bool ok() const { return violations.empty(); }
  nlohmann::json to_json(bool with_timing = true) const;
  std::string to_csv(bool with_timing = true) const;
};

MetricsReport run(const WorkloadSpec& spec);

}  // namespace mvgc::bench
