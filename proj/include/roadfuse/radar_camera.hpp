#pragma once

/// \file
/// \brief Radar-camera branch: radar ROI generation with distance compensation,
/// IOU matching by optimal assignment, and Kalman track management.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "roadfuse/geometry.hpp"
#include "roadfuse/kalman.hpp"
#include "roadfuse/sensors.hpp"

namespace roadfuse {

/// Anchor expansion S = alpha / d + beta applied to a predefined box size.
struct RadarRoiParams {
  double alpha = 1.8;
  double beta = 0.2;
  double base_width = 100.0;  ///< px
  double base_height = 60.0;  ///< px

  double scale(double distance) const { return alpha / distance + beta; }
  /// Throws std::invalid_argument unless scale(d) > 0 for every d in (0, max_range].
  void validate(double max_range) const;
};

struct RadarRoi {
  Box2D box;
  Pixel poi;
  std::size_t point_index = 0;
  double distance = 0.0;  ///< boresight distance used for S
};

struct RadarRoiResult {
  std::vector<RadarRoi> rois;
  std::size_t skipped_behind = 0;
  std::size_t skipped_outside = 0;
};

/// Projects each radar return radar -> world -> pixel and expands the POI into
/// a distance-compensated ROI clipped to the image.
RadarRoiResult radar_roi(std::span<const RadarPoint> points, const CameraModel& cam,
                         const Pose3& radar_pose, const RadarRoiParams& params);

/// Radar-frame Cartesian position of a return (on the sensor's z = 0 plane).
Vec3 radar_point_position(const RadarPoint& p);

struct MatchedPair {
  std::size_t roi_index = 0;
  std::size_t detection_index = 0;
  double iou = 0.0;
  Pixel radar_center;
  Pixel camera_center;
};

inline constexpr double kRadarCameraIouGate = 0.6;

/// Full IOU matrix, Kuhn-Munkres on IOU as affinity, then drops pairs below
/// `gate`. Output is ordered by ROI index.
std::vector<MatchedPair> iou_match(std::span<const RadarRoi> rois,
                                   std::span<const Detection2D> detections,
                                   double gate = kRadarCameraIouGate);

enum class TrackStatus { kNew, kExisting, kLost };

struct TrackState {
  std::int64_t id = 0;
  KalmanState filter;
  TrackStatus status = TrackStatus::kNew;
  int consecutive_missed = 0;
  Eigen::Vector2d last_velocity = Eigen::Vector2d::Zero();
  double confidence = 0.0;
};

/// World-frame candidate object produced from one matched radar/camera pair.
struct Potential {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();
  double confidence = 1.0;
};

enum class FusionSource { kRadarCamera, kLidarCamera };
const char* to_string(FusionSource s);

struct FusedObject {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();
  FusionSource source = FusionSource::kRadarCamera;
  double confidence = 0.0;
  double t = 0.0;
  std::int64_t track_id = -1;
  Eigen::Vector2d observation = Eigen::Vector2d::Zero();  ///< potential that updated the track
};

struct TrackerParams {
  double gate_radius = 0.3;  ///< m
  Mat2 Q = Mat2::Identity() * 1e-4;
  Mat2 R = Mat2::Identity() * 0.01;
  int max_missed = 3;
};

struct TrackUpdateResult {
  std::vector<TrackState> tracks;
  std::vector<FusedObject> emitted;
};

/// One frame of the track lifecycle.
///
/// All live tracks are predicted, then associated to potentials by global
/// nearest neighbor within `gate_radius` (shortest distance first, ties to the
/// lower track id). Matched tracks are updated and emitted; unmatched
/// potentials open new tracks that are not emitted this frame; unmatched
/// tracks coast and are removed after more than `max_missed` misses. A new
/// track that misses its second frame is dropped.
TrackUpdateResult track_update(std::span<const TrackState> tracks,
                               std::span<const Potential> potentials, const TrackerParams& params,
                               double t, std::int64_t& next_track_id);

/// Stateful wrapper holding tracks across frames for one agent.
class RadarCameraTracker {
 public:
  explicit RadarCameraTracker(TrackerParams params) : params_(std::move(params)) {}

  std::vector<FusedObject> update(std::span<const Potential> potentials, double t);
  const std::vector<TrackState>& tracks() const { return tracks_; }

 private:
  TrackerParams params_;
  std::vector<TrackState> tracks_;
  std::int64_t next_id_ = 1;
};

/// Turns a matched pair into a world potential: bearing from the camera box's
/// bottom-center ground point (seen from the radar), range from the radar.
Potential make_potential(const RadarPoint& point,
                         const Detection2D& detection, const CameraModel& cam,
                         const Pose3& radar_pose);

}  // namespace roadfuse
