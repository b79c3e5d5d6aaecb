#include "mvgc/verify/report.hpp"

namespace mvgc::verify {

nlohmann::json schedule_json(const Schedule& schedule) {
  return {{"seed", schedule.seed}, {"steps", schedule.steps}};
}

nlohmann::json explore_report(const ExploreResult& result) {
  nlohmann::json j;
  j["pass"] = !result.failure.has_value();
  j["schedules"] = result.schedules;
  j["events"] = result.events;
  j["max_choices"] = result.max_choices;
  j["complete"] = result.complete;
  if (result.failure) {
    j["invariant"] = result.failure->violation.invariant;
    j["message"] = result.failure->violation.message;
    j["event_index"] = result.failure->violation.event_index;
    j["schedule"] = schedule_json(result.failure->schedule);
    j["schedule_text"] = format_schedule(result.failure->schedule);
    j["original_schedule_length"] = result.failure->original.steps.size();
  } else {
    j["invariant"] = nullptr;
    j["schedule"] = nullptr;
  }
  return j;
}

nlohmann::json violation_report(const std::optional<Violation>& violation, const Schedule& schedule) {
  nlohmann::json j;
  j["pass"] = !violation.has_value();
  j["invariant"] = violation ? nlohmann::json(violation->invariant) : nlohmann::json(nullptr);
  if (violation) {
    j["message"] = violation->message;
    j["event_index"] = violation->event_index;
  }
  j["schedule"] = schedule_json(schedule);
  return j;
}

}  // namespace mvgc::verify
