#include "roadfuse/radar_camera.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include "roadfuse/assignment.hpp"

namespace roadfuse {

void RadarRoiParams::validate(double max_range) const {
  if (!(base_width > 0.0) || !(base_height > 0.0)) {
    throw std::invalid_argument("radar ROI base size must be positive");
  }
  if (!(max_range > 0.0)) {
    throw std::invalid_argument("radar max range must be positive");
  }
  // S(d) is monotone in d, so checking both ends of (0, max_range] suffices.
  const bool near_ok = alpha > 0.0 || (alpha == 0.0 && beta > 0.0);
  if (!near_ok || !(scale(max_range) > 0.0)) {
    throw std::invalid_argument("radar ROI scale alpha/d + beta must stay positive in range");
  }
}

Vec3 radar_point_position(const RadarPoint& p) {
  return {p.range * std::cos(p.azimuth), p.range * std::sin(p.azimuth), 0.0};
}

RadarRoiResult radar_roi(std::span<const RadarPoint> points, const CameraModel& cam,
                         const Pose3& radar_pose, const RadarRoiParams& params) {
  RadarRoiResult out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3 local = radar_point_position(points[i]);
    const auto proj = cam.try_project(radar_pose.transform_point(local));
    if (!proj) {
      ++out.skipped_behind;
      continue;
    }
    // Distance along the radar boresight; lateral offset does not enter S.
    const double d = local.x();
    if (!(d > 0.0)) {
      ++out.skipped_behind;
      continue;
    }
    const double s = params.scale(d);
    const auto box = Box2D::centered(proj->pixel, params.base_width * s, params.base_height * s)
                         .clipped(cam.width(), cam.height());
    if (!box) {
      ++out.skipped_outside;
      continue;
    }
    out.rois.push_back({*box, proj->pixel, i, d});
  }
  return out;
}

std::vector<MatchedPair> iou_match(std::span<const RadarRoi> rois,
                                   std::span<const Detection2D> detections, double gate) {
  if (rois.empty() || detections.empty()) {
    return {};
  }
  Eigen::MatrixXd iou(static_cast<Eigen::Index>(rois.size()),
                      static_cast<Eigen::Index>(detections.size()));
  for (std::size_t r = 0; r < rois.size(); ++r) {
    for (std::size_t c = 0; c < detections.size(); ++c) {
      iou(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          iou_axis_aligned(rois[r].box, detections[c].box);
    }
  }
  std::vector<MatchedPair> out;
  for (const auto& a : max_weight_matching(iou)) {
    if (a.weight < gate) {
      continue;
    }
    out.push_back({a.row, a.col, a.weight, rois[a.row].box.center(),
                   detections[a.col].box.center()});
  }
  return out;
}

const char* to_string(FusionSource s) {
  return s == FusionSource::kRadarCamera ? "radar-camera" : "lidar-camera";
}

TrackUpdateResult track_update(std::span<const TrackState> tracks,
                               std::span<const Potential> potentials, const TrackerParams& params,
                               double t, std::int64_t& next_track_id) {
  std::vector<KalmanState> predicted;
  predicted.reserve(tracks.size());
  for (const auto& tr : tracks) {
    predicted.push_back(kalman_predict(tr.filter));
  }

  struct Candidate {
    double distance;
    std::int64_t track_id;
    std::size_t track;
    std::size_t potential;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    for (std::size_t j = 0; j < potentials.size(); ++j) {
      const double d = (predicted[i].x - potentials[j].position).norm();
      if (d <= params.gate_radius) {
        candidates.push_back({d, tracks[i].id, i, j});
      }
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.distance, a.track_id, a.potential) <
           std::tie(b.distance, b.track_id, b.potential);
  });
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> track_match(tracks.size(), kNone);
  std::vector<char> potential_used(potentials.size(), 0);
  for (const auto& c : candidates) {
    if (track_match[c.track] != kNone || potential_used[c.potential]) {
      continue;
    }
    track_match[c.track] = c.potential;
    potential_used[c.potential] = 1;
  }

  TrackUpdateResult out;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    TrackState tr = tracks[i];
    if (track_match[i] != kNone) {
      const Potential& p = potentials[track_match[i]];
      tr.filter = kalman_update(predicted[i], p.position);
      tr.status = TrackStatus::kExisting;
      tr.consecutive_missed = 0;
      tr.last_velocity = p.velocity;
      tr.confidence = p.confidence;
      out.emitted.push_back({tr.filter.x, tr.last_velocity, FusionSource::kRadarCamera,
                             tr.confidence, t, tr.id, p.position});
      out.tracks.push_back(std::move(tr));
      continue;
    }
    if (tr.status == TrackStatus::kNew) {
      continue;
    }
    tr.consecutive_missed += 1;
    if (tr.consecutive_missed > params.max_missed) {
      continue;
    }
    tr.status = TrackStatus::kLost;
    tr.filter = predicted[i];
    out.tracks.push_back(std::move(tr));
  }
  for (std::size_t j = 0; j < potentials.size(); ++j) {
    if (potential_used[j]) {
      continue;
    }
    TrackState tr;
    tr.id = next_track_id++;
    tr.filter = KalmanState::initial(potentials[j].position, params.Q, params.R);
    tr.status = TrackStatus::kNew;
    tr.last_velocity = potentials[j].velocity;
    tr.confidence = potentials[j].confidence;
    out.tracks.push_back(std::move(tr));
  }
  return out;
}

std::vector<FusedObject> RadarCameraTracker::update(std::span<const Potential> potentials,
                                                    double t) {
  auto res = track_update(tracks_, potentials, params_, t, next_id_);
  tracks_ = std::move(res.tracks);
  return std::move(res.emitted);
}

Potential make_potential(const RadarPoint& point,
                         const Detection2D& detection, const CameraModel& cam,
                         const Pose3& radar_pose) {
  const Vec3 radar_world = radar_pose.transform_point(radar_point_position(point));
  const Eigen::Vector2d origin = radar_pose.translation().head<2>();
  Eigen::Vector2d ray = radar_world.head<2>() - origin;
  const double range = ray.norm();
  const Eigen::Vector2d radial = range > 0.0 ? Eigen::Vector2d(ray / range) : Eigen::Vector2d::Zero();

  Potential out;
  out.confidence = detection.confidence;
  out.velocity = point.radial_velocity * radial;
  out.position = radar_world.head<2>();
  try {
    const Vec3 ground = pixel_to_ground(cam, detection.box.bottom_center(), 0.0);
    const Eigen::Vector2d bearing = ground.head<2>() - origin;
    if (bearing.norm() > 1e-9) {
      out.position = origin + range * bearing.normalized();
    }
  } catch (const GeometryError&) {
    // keep the radar-only position
  }
  return out;
}

}  // namespace roadfuse
