#pragma once

#include <string>
#include <vector>

#include "mstrack/simulator.hpp"

namespace mstrack {

/// Bundled scenarios for each experiment family. Geometry is approximate:
/// perimeters, speeds and start points are chosen to resemble the published figures.
std::vector<std::string> preset_names();

bool has_preset(const std::string& name);

/// Throws std::invalid_argument for unknown names.
Scenario preset(const std::string& name);

}  // namespace mstrack
