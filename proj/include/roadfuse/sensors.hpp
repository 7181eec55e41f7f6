#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "roadfuse/geometry.hpp"

namespace roadfuse {

enum class SensorKind { kCamera, kRadar, kLidar };

const char* to_string(SensorKind kind);
SensorKind sensor_kind_from_string(const std::string& s);

struct RadarPoint {
  double range = 0.0;            ///< m
  double azimuth = 0.0;          ///< rad, sensor frame, counter-clockwise from boresight
  double radial_velocity = 0.0;  ///< m/s, positive when moving away
  int source_vehicle = -1;       ///< emulator provenance; never read by fusion
};

struct Detection2D {
  std::string camera_id;
  Box2D box;
  std::string label = "vehicle";
  double confidence = 1.0;
  int source_vehicle = -1;  ///< -1 for emulated false positives
};

struct Detection3D {
  Box3D box;
  std::string label = "vehicle";
  double confidence = 1.0;
  int source_vehicle = -1;
};

using FramePayload =
    std::variant<std::vector<Detection2D>, std::vector<RadarPoint>, std::vector<Detection3D>>;

struct StampedFrame {
  std::string sensor_id;
  double t = 0.0;
  FramePayload payload;

  SensorKind kind() const { return static_cast<SensorKind>(payload.index()); }
};

struct RadarParams {
  double fov_half_angle = 0.5;  ///< rad
  double max_range = 10.0;      ///< m
  std::string paired_camera;
};

struct LidarParams {
  double min_range = 0.1;
  double max_range = 12.0;
  /// Sensor-frame detection volume (x, y, z bounds).
  Vec3 volume_min{-12.0, -12.0, -1.0};
  Vec3 volume_max{12.0, 12.0, 4.0};
};

struct SensorRig {
  std::string id;
  std::string agent_id;
  SensorKind kind = SensorKind::kCamera;
  Pose3 pose;  ///< sensor -> world
  double rate = 1.0;
  /// Sensor stops emitting after this sim time (fault injection).
  std::optional<double> halt_at;
  std::optional<CameraModel> camera;
  RadarParams radar;
  LidarParams lidar;
};

}  // namespace roadfuse
