// Schedule exploration and replay.
//
//   mvgc_verify explore --scenario list --processes 2 --variant 0 --depth 14
//   mvgc_verify random  --scenario snapshot --seeds 1000
//   mvgc_verify run     --scenario list --schedule failing.txt --trace out.jsonl
//
// Prints a JSON report. Exit status: 0 pass, 1 violation, 2 usage error.

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mvgc/verify/report.hpp"
#include "mvgc/verify/scenarios.hpp"

using namespace mvgc;
using namespace mvgc::verify;

int main(int argc, char** argv) {
  CLI::App app{"Deterministic schedule exploration for the version list, tracker and snapshot store"};
  app.require_subcommand(1);

  std::string scenario = "list";
  int processes = 2;
  int variant = 0;
  std::string mode_name = "reclaiming";
  std::string report_path;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--scenario", scenario, "list, snapshot or tracker")
        ->check(CLI::IsMember({"list", "snapshot", "tracker"}));
    sub->add_option("--processes", processes, "number of virtual processes")->check(CLI::Range(2, 3));
    sub->add_option("--variant", variant, "program variant");
    sub->add_option("--mode", mode_name, "baseline or reclaiming")
        ->check(CLI::IsMember({"baseline", "reclaiming"}));
    sub->add_option("--report", report_path, "also write the JSON report here");
  };

  auto* explore_cmd = app.add_subcommand("explore", "enumerate all interleavings of the first N choice points");
  add_common(explore_cmd);
  std::size_t depth = 14;
  std::size_t max_schedules = 0;
  bool no_minimize = false;
  explore_cmd->add_option("--depth", depth, "choice points enumerated exhaustively");
  explore_cmd->add_option("--max-schedules", max_schedules, "stop after this many executions (0: no cap)");
  explore_cmd->add_flag("--no-minimize", no_minimize, "report the failing schedule as found");

  auto* random_cmd = app.add_subcommand("random", "run randomly scheduled executions");
  add_common(random_cmd);
  std::uint64_t first_seed = 1;
  std::size_t seeds = 1000;
  random_cmd->add_option("--first-seed", first_seed);
  random_cmd->add_option("--seeds", seeds, "number of executions");

  auto* run_cmd = app.add_subcommand("run", "replay one schedule file");
  add_common(run_cmd);
  std::string schedule_path;
  std::string trace_path;
  run_cmd->add_option("--schedule", schedule_path, "schedule file")->required();
  run_cmd->add_option("--trace", trace_path, "write the event trace as JSON lines");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  ReclaimMode mode = mode_name == "baseline" ? ReclaimMode::baseline : ReclaimMode::reclaiming;
  ScenarioFactory factory;
  try {
    factory = scenario_by_name(scenario, processes, variant, mode);
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }

  nlohmann::json report;
  auto start = std::chrono::steady_clock::now();
  try {
    if (*explore_cmd) {
      ExploreOptions opt;
      opt.depth = depth;
      opt.max_schedules = max_schedules;
      opt.minimize = !no_minimize;
      report = explore_report(explore(factory, opt));
      report["depth"] = depth;
    } else if (*random_cmd) {
      report = explore_report(explore_random(factory, first_seed, seeds));
    } else {
      std::ifstream in(schedule_path);
      if (!in) {
        std::cerr << "cannot read " << schedule_path << '\n';
        return 2;
      }
      std::stringstream text;
      text << in.rdbuf();
      Schedule s = parse_schedule(text.str());
      RunResult run = run_schedule(factory, s);
      if (!trace_path.empty()) std::ofstream(trace_path) << trace_to_jsonl(run.trace);
      report = violation_report(check_schedule(factory, s), s);
      report["events"] = run.trace.events.size();
    }
  } catch (const ScheduleError& e) {
    std::cerr << "schedule error: " << e.what() << '\n';
    return 2;
  }
  report["scenario"] = {{"name", scenario}, {"processes", processes}, {"variant", variant}, {"mode", mode_name}};
  report["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::string text = report.dump(2);
  std::cout << text << '\n';
  if (!report_path.empty()) std::ofstream(report_path) << text << '\n';
  return report["pass"].get<bool>() ? 0 : 1;
}
