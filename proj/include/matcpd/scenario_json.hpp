#pragma once

#include <json.hpp>

#include "matcpd/simulate.hpp"

namespace matcpd {

ScenarioSpec scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const ScenarioSpec& spec);
ScenarioSpec load_scenario(const std::string& path);

}  // namespace matcpd
