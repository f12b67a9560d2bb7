#pragma once

// RunReport serialization (JSON), CSV artifacts, run comparison and the
// artifact self-check.

#include "glc/time_coupling.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace glc {

nlohmann::json report_to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& j);
RunReport read_report(const std::filesystem::path& path);

/// Formats with 17 significant digits.
std::string format_double(double v);

/// report.json, steps_<model>.csv, grid_<model>.csv, residuals.csv and
/// fields_{nodes,gp}_<model>_<k>.csv for each cycle-station snapshot.
void write_run_artifacts(const RunReport& report, const std::filesystem::path& dir);
void write_grid_csv(const TimeGrid& grid, const std::filesystem::path& path);

struct Comparison {
    Point location = Point::Zero();   // reference Gauss point with maximal p_f
    Point matched = Point::Zero();    // nearest Gauss point of the compared run
    double p_f_reference = 0.0;
    double p_f_run = 0.0;
    double von_mises_reference = 0.0;
    double von_mises_run = 0.0;

    double p_f_error() const;          // signed relative error
    double von_mises_error() const;
};

/// Errors of `run` against `reference` at the reference's most loaded
/// Gauss point. Throws IncompatibleRuns.
Comparison compare_runs(const RunReport& reference, const RunReport& run);

/// Parses every artifact in `dir` against its schema; returns the list of
/// problems (empty when all files are valid).
std::vector<std::string> selfcheck(const std::filesystem::path& dir);

}  // namespace glc
