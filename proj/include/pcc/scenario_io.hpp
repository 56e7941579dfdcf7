#pragma once

#include "pcc/simulation.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace pcc {

/// Parses a JSON scenario. Headings, heading variances and turn-rate bounds
/// are given in degrees in the document and converted to radians. Every field
/// except `seed` and `planner` is required; unknown keys are rejected.
/// Syntax errors name the line and column, content errors the field path.
ScenarioConfig parse_scenario(std::string_view text);

/// Reads and parses a scenario file; the path is prefixed to any error.
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Inverse of parse_scenario (indented JSON, degrees in the document).
std::string scenario_to_json(const ScenarioConfig& cfg);

}  // namespace pcc
