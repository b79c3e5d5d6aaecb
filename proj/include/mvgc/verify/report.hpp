#pragma once

// JSON reports: {"pass", "invariant", "message", "schedule", ...}.

#include <json.hpp>

#include "mvgc/verify/runner.hpp"

namespace mvgc::verify {

nlohmann::json schedule_json(const Schedule& schedule);
nlohmann::json explore_report(const ExploreResult& result);
nlohmann::json violation_report(const std::optional<Violation>& violation, const Schedule& schedule);

}  // namespace mvgc::verify
