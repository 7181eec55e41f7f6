#pragma once

/// \file
/// \brief Lidar-camera branch: distance-ordered mark/mask box matching across
/// overlapping cameras, then center/azimuth merging of matched boxes.

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "roadfuse/geometry.hpp"
#include "roadfuse/sensors.hpp"

namespace roadfuse {

/// Hull of the projected corners that lie in front of the camera, clamped to
/// the image (may come back degenerate when the box is off-image).
/// Throws GeometryError(kFullyBehind) when no corner has positive depth.
Box2D project_box_to_image(const Box3D& box, const CameraModel& cam);
std::optional<Box2D> try_project_box_to_image(const Box3D& box, const CameraModel& cam);

struct DetectionRef {
  std::size_t camera = 0;
  std::size_t index = 0;
  auto operator<=>(const DetectionRef&) const = default;
};

struct LedgerEntry {
  std::size_t box3d = 0;
  DetectionRef detection;
  double iou = 0.0;
};

struct CameraIou {
  std::size_t box3d = 0;
  std::size_t camera = 0;
  double max_iou = 0.0;  ///< max over the camera's unclaimed boxes; 0 if none
};

struct MatchLedger {
  std::vector<std::size_t> matched_3d;  ///< in the order they were matched
  std::vector<LedgerEntry> marked;      ///< one per matched 3D box
  std::vector<LedgerEntry> masked;      ///< duplicates seen by farther cameras
  std::vector<CameraIou> iou_array;     ///< every (3D box, camera) evaluation, in visit order
  std::vector<std::size_t> discarded_3d;
  std::vector<DetectionRef> discarded_2d;

  bool is_marked(const DetectionRef& r) const;
  bool is_masked(const DetectionRef& r) const;
};

inline constexpr double kLidarCameraIouGate = 0.7;

/// Order in which 3D boxes claim 2D boxes: descending confidence, stable.
std::vector<std::size_t> traversal_order(std::span<const Detection3D> d3);

/// Cameras sorted by distance from the box center to the optical center,
/// ties to the lower camera index.
std::vector<std::size_t> cameras_by_distance(const Vec3& center,
                                             std::span<const CameraModel> cams);

/// For each 3D box (traversal order) and each camera (nearest first): IOU of
/// the projected box against that camera's unclaimed 2D boxes; a winner at or
/// above `gate` is marked if the 3D box is still unmatched, otherwise masked
/// and removed from the pool. IOU ties go to the higher-confidence 2D box,
/// then the lower index. Whatever is left unclaimed is discarded.
MatchLedger box_match(std::span<const Detection3D> d3,
                      std::span<const std::vector<Detection2D>> d2,
                      std::span<const CameraModel> cams, double gate = kLidarCameraIouGate);

enum class MatchStatus { kMatched, kUnmatched3dKept };

struct MergedBox {
  Box3D box;
  std::size_t box3d = 0;
  std::vector<DetectionRef> contributors;  ///< marked first, then masked
  double confidence = 0.0;
  MatchStatus status = MatchStatus::kMatched;
};

struct MergeParams {
  double lidar_weight = 0.7;
  double yaw_step = 0.5 * 3.14159265358979323846 / 180.0;
  double yaw_range = 15.0 * 3.14159265358979323846 / 180.0;
  double aspect_tolerance = 0.02;
  bool keep_unmatched_3d = false;
};

/// Ground point the camera implies for the box center at the lidar height.
///
/// The detection center is shifted by the offset between the projected lidar
/// hull center and the projected lidar center before back-projection, so an
/// exact 2D box maps back to the exact 3D center.
std::optional<Vec3> camera_center_estimate(const Box3D& lidar_box, const Detection2D& det,
                                           const CameraModel& cam);

/// Confidence-weighted mean width/height of `box` reprojected into the cameras
/// of `refs` (weights from the referenced detections).
std::optional<double> reprojected_aspect(const Box3D& box, std::span<const DetectionRef> refs,
                                         std::span<const std::vector<Detection2D>> d2,
                                         std::span<const CameraModel> cams);

/// Yaw sweep 0, +step, -step, +2 step, ... up to +-range around the input yaw;
/// stops at the first candidate within tolerance, else keeps the closest.
double refine_yaw(const Box3D& box, std::span<const DetectionRef> refs,
                  std::span<const std::vector<Detection2D>> d2, std::span<const CameraModel> cams,
                  const MergeParams& params);

std::vector<MergedBox> merge_boxes(const MatchLedger& ledger, std::span<const Detection3D> d3,
                                   std::span<const std::vector<Detection2D>> d2,
                                   std::span<const CameraModel> cams, const MergeParams& params);

}  // namespace roadfuse
