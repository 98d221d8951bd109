#pragma once

#include <string>
#include <vector>

#include "refpts/sim.hpp"

namespace refpts::io {

/// Parses the documented JSON scenario schema. Missing keys fall back to the
/// struct defaults; unknown keys are ignored. Throws std::invalid_argument on
/// malformed input.
sim::ScenarioConfig parse_scenario_config(const std::string& json_text);
sim::ScenarioConfig load_scenario_config(const std::string& path);
std::string scenario_config_to_json(const sim::ScenarioConfig& cfg, int indent = 2);

/// Report serialization round-trips losslessly (parse(render(r)) == r).
std::string report_to_json(const sim::ScenarioReport& report, int indent = 2);
sim::ScenarioReport parse_report(const std::string& json_text);
sim::ScenarioReport load_report(const std::string& path);

/// Line-delimited per-frame tracker event log.
std::string events_to_jsonl(const std::vector<track::FrameEvents>& events);

/// Plot-ready per-frame metric series.
std::string metrics_csv(const sim::ScenarioReport& report);

std::string load_text(const std::string& path);
void save_text(const std::string& path, const std::string& text);

}  // namespace refpts::io
