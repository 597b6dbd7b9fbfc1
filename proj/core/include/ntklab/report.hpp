#pragma once

#include <filesystem>
#include <string>

#include "ntklab/probes.hpp"

namespace ntklab {

// Round-trippable JSON encoding of a report (scalars, series, fit, meta,
// flags). Doubles are emitted with 17 significant digits.
std::string to_json_string(const ProbeReport& rep);
ProbeReport report_from_json_string(const std::string& text);

struct ReportFiles {
  std::filesystem::path json;
  std::vector<std::filesystem::path> csv;   // one per series
  std::vector<std::filesystem::path> svg;   // only with plots enabled
};

// Writes <dir>/<name>.json plus <dir>/<name>.<series>.csv for every series;
// with plots, a scatter SVG per series (log-log axes when a fit is attached,
// with the fitted line overlaid). Creates dir if needed.
ReportFiles save_report(const ProbeReport& rep, const std::filesystem::path& dir,
                        bool plots = false);

}  // namespace ntklab
