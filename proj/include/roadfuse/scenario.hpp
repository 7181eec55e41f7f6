#pragma once

/// \file
/// \brief Scenario configuration: field, road graph, vehicles, sensor rigs,
/// noise, agents and fusion parameters. Loaded from JSON (docs/scenario.md).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "roadfuse/geometry.hpp"
#include "roadfuse/lidar_camera.hpp"
#include "roadfuse/radar_camera.hpp"
#include "roadfuse/sensors.hpp"

namespace roadfuse {

/// Schema violation or unreadable scenario. `where` names the line (syntax
/// errors) or the field path (schema errors).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& where, const std::string& what)
      : std::runtime_error(where + ": " + what), where_(where) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

struct RoadNode {
  int id = 0;
  Vec2 position = Vec2::Zero();
};

struct RoadEdge {
  std::size_t from = 0;  ///< node index
  std::size_t to = 0;    ///< node index
  double speed_limit = 0.5;
  double length = 0.0;
};

class RoadGraph {
 public:
  RoadGraph() = default;
  RoadGraph(std::vector<RoadNode> nodes, std::vector<RoadEdge> edges);

  const std::vector<RoadNode>& nodes() const { return nodes_; }
  const std::vector<RoadEdge>& edges() const { return edges_; }
  const std::vector<std::size_t>& out_edges(std::size_t node) const { return out_[node]; }

  std::optional<std::size_t> node_index(int id) const;
  std::optional<std::size_t> find_edge(std::size_t from, std::size_t to) const;
  /// Number of distinct neighbors (either direction).
  std::size_t degree(std::size_t node) const;
  /// Edge indices along a node-id path; nullopt if any hop is missing.
  std::optional<std::vector<std::size_t>> edges_of_path(const std::vector<int>& node_ids) const;

  Vec2 edge_start(std::size_t e) const { return nodes_[edges_[e].from].position; }
  Vec2 edge_end(std::size_t e) const { return nodes_[edges_[e].to].position; }

 private:
  std::vector<RoadNode> nodes_;
  std::vector<RoadEdge> edges_;
  std::vector<std::vector<std::size_t>> out_;
};

struct VehicleSpec {
  int id = 0;
  Dimensions dims{0.3, 0.16, 0.12};
  std::vector<int> route;  ///< node ids
  double speed = 0.4;      ///< nominal, m/s
  double start_offset = 0.0;  ///< initial distance along the first route edge
};

struct CameraNoise {
  double pixel_sigma = 0.0;
  double miss_rate = 0.0;
  double false_positive_rate = 0.0;  ///< probability of one uniform false box per frame
};

struct RadarNoise {
  double range_sigma = 0.0;
  double azimuth_sigma = 0.0;
  double velocity_sigma = 0.0;
  double position_variance = 0.0;  ///< m^2 per axis, added before polar conversion
};

struct LidarNoise {
  double center_sigma = 0.0;
  double yaw_sigma = 0.0;
  double dimension_sigma = 0.0;
  double miss_rate = 0.0;
};

struct NoiseProfile {
  CameraNoise camera;
  RadarNoise radar;
  LidarNoise lidar;

  void validate() const;
};

struct AgentRegionSpec {
  std::string id;
  std::vector<Vec2> polygon;
};

struct IntersectionZone {
  int number = 0;   ///< 1-based label used in flow tables
  int node_id = 0;
  Vec2 center = Vec2::Zero();
  double radius = 0.4;
};

struct TrafficParams {
  double lane_offset = 0.1;   ///< right-hand lane offset from the centerline
  double min_gap = 0.05;      ///< bumper-to-bumper
  double headway = 0.35;      ///< start slowing when the free gap drops below this
  double lock_radius = 0.25;  ///< intersection reservation radius around lock nodes
};

struct FusionParams {
  RadarRoiParams roi;
  TrackerParams tracker;
  MergeParams merge;
  double radar_camera_gate = kRadarCameraIouGate;
  double lidar_camera_gate = kLidarCameraIouGate;
};

struct SchedulingParams {
  double congestion_lambda = 0.5;  ///< s per vehicle
  double speed_floor = 0.05;       ///< m/s
  double replan_period = 1.0;      ///< s
  double density_window = 1.0;     ///< s
  double snap_distance = 0.3;      ///< m
};

struct ScenarioConfig {
  double field_width = 8.0;
  double field_length = 10.0;
  RoadGraph graph;
  std::vector<VehicleSpec> vehicles;
  std::vector<SensorRig> rigs;
  NoiseProfile noise;
  double duration = 60.0;
  double tick = 0.0005;
  std::uint64_t seed = 1;
  std::vector<AgentRegionSpec> agents;
  std::vector<IntersectionZone> intersections;
  TrafficParams traffic;
  FusionParams fusion;
  SchedulingParams scheduling;
  /// Branch toggles as read from the file; the run manifest can switch them off.
  bool enable_radar_camera = true;
  bool enable_lidar_camera = true;

  const SensorRig* rig(const std::string& id) const;
  /// Slowest configured sensor rate (the bundle reference rate).
  double slowest_rate() const;
};

ScenarioConfig parse_scenario(const std::string& text, const std::string& source = "<scenario>");
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Cross-field checks (routes connected, rigs owned by declared agents, ...).
void validate_scenario(const ScenarioConfig& cfg);

}  // namespace roadfuse
