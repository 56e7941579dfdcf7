#pragma once

#include "pcc/simulation.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace pcc {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double x);

/// One row per (tick, robot): ground truth, belief mean, covariance upper
/// triangle, applied control and the plan's minimum margin. Headings are in
/// degrees (variances in deg^2, covariances in m*deg).
void write_trajectory_csv(std::ostream& out, const RunLog& log, const ScenarioConfig& cfg);

/// Reads write_trajectory_csv output back. Plan times are not stored and come back as 0.
RunLog read_trajectory_csv(std::istream& in, const ScenarioConfig& cfg);

/// One row per robot plus an "all" row. Wall-clock timings are left out so
/// that identical runs give identical bytes.
void write_metrics_csv(std::ostream& out, const RunMetrics& metrics);

/// Top view of every robot's ground-truth path with obstacles, starts and
/// goals; 3-D runs add an x-z side view below it.
void write_trajectories_svg(std::ostream& out, const RunLog& log, const ScenarioConfig& cfg);

struct ExportPaths {
  std::filesystem::path trajectory_csv;
  std::filesystem::path metrics_csv;
  std::filesystem::path svg;
};

/// Writes trajectory.csv, metrics.csv and trajectories.svg into `dir`
/// (created if missing). An empty log gives headers-only CSVs. I/O failures
/// throw std::runtime_error naming the path.
ExportPaths export_run(const RunLog& log, const RunMetrics& metrics, const ScenarioConfig& cfg,
                       const std::filesystem::path& dir);

}  // namespace pcc
