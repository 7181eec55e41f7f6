#pragma once

/// \file
/// \brief End-to-end wiring: world -> emulators -> per-agent sync -> fusion
/// -> metrics, density maps and routing; artifact writing and replay.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "roadfuse/metrics.hpp"
#include "roadfuse/scenario.hpp"
#include "roadfuse/scheduling.hpp"

namespace roadfuse {

struct RunManifest {
  std::filesystem::path scenario;
  RoutingMode mode = RoutingMode::kRandom;
  std::filesystem::path out_dir;  ///< empty: keep results in memory only
  std::int64_t frames = 0;        ///< 0: derived from the scenario duration
  std::optional<std::uint64_t> seed;
  bool enable_radar_camera = true;
  bool enable_lidar_camera = true;
  bool write_frame_log = true;
  bool parallel_agents = false;  ///< fuse agents concurrently within a frame
  double grid_cell = 0.25;

  /// Throws ConfigError.
  void validate() const;
};

struct BranchCounters {
  std::size_t detections = 0;
  std::size_t truths = 0;
  std::size_t matched = 0;
  std::size_t missed = 0;
  std::size_t false_detections = 0;
};

struct ThroughputReport {
  std::int64_t frames = 0;
  double wall_seconds = 0.0;
  double fps = 0.0;  ///< fused frames per wall-clock second
  double sim_seconds = 0.0;
};

struct RunSummary {
  std::int64_t frames = 0;
  MetricGrid grid{8.0, 10.0, 0.25};
  FlowCounter flows{{}};
  ThroughputReport throughput;
  std::optional<FilterReport> filter;
  BranchCounters radar_camera;
  BranchCounters lidar_camera;
  std::size_t reroutes = 0;
  double records_consumed = 0.0;
  std::size_t respawns = 0;
};

/// Runs `cfg` under `manifest` (scenario path ignored). Writes artifacts when
/// manifest.out_dir is set.
RunSummary run_pipeline(const ScenarioConfig& cfg, const RunManifest& manifest);

/// Loads the scenario, runs and reports; returns the process exit status
/// (0 ok, 1 config error, 2 runtime error).
int run(const RunManifest& manifest, std::ostream& log);

/// Recomputes the metric grid from a run directory's track and truth logs.
/// Writes grid files to `out_dir` when it is non-empty.
MetricGrid replay(const std::filesystem::path& run_dir, std::optional<double> cell,
                  const std::filesystem::path& out_dir = {});

void write_grids(const MetricGrid& grid, const std::filesystem::path& dir);

/// Flow table rows: one header, then one row per (label, counter).
void write_flow_table(std::ostream& out,
                      const std::vector<std::pair<std::string, const FlowCounter*>>& rows);

struct RoiCalibration {
  double alpha = 0.0;
  double beta = 0.0;
  double base_height = 0.0;  ///< suggested for the configured base width
  std::size_t samples = 0;
  double rms = 0.0;
  double mid_range_iou = 0.0;  ///< mean ROI/true-box IOU over the middle third of radar range
};

/// Least-squares fit of S(d) = alpha / d + beta to the scale that makes the
/// base ROI match noise-free camera boxes of radar-visible vehicles. The base
/// height follows the median mid-range box aspect.
RoiCalibration calibrate_roi(const ScenarioConfig& cfg, std::int64_t frames);

}  // namespace roadfuse
