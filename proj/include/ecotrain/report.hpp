#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ecotrain/summary.hpp"

namespace ecotrain {

/// File names of a report bundle, in the order they are written.
const std::vector<std::string>& bundle_files();

/// Writes the CSV tables and manifest.json into `dir` (created if needed).
/// Efficiencies are printed with four significant digits, ratios with three
/// decimals.
void write_bundle(const EfficiencyReport& report, const std::filesystem::path& dir);

/// Short human-readable summary for the terminal.
std::string render_text(const EfficiencyReport& report);

}  // namespace ecotrain
