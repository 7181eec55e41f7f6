#pragma once

/// \file
/// \brief Frame transforms, pinhole projection and box geometry shared by every
/// fusion stage.
///
/// Conventions:
///  * world frame: x east, y north, z up (meters)
///  * camera frame: x right, y down, z forward along the optical axis
///  * radar frame: x along boresight, y left, z up

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace roadfuse {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

enum class GeometryErrc {
  kInvalidPose,
  kInvalidCamera,
  kInvalidBox,
  kBehindCamera,
  kRayParallel,
  kZeroUnion,
  kFullyBehind,
};

class GeometryError : public std::runtime_error {
 public:
  GeometryError(GeometryErrc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  GeometryErrc code() const noexcept { return code_; }

 private:
  GeometryErrc code_;
};

/// Wraps an angle into (-pi, pi]; -pi maps to +pi.
double normalize_angle(double a);

/// Rigid transform p' = R p + T. Rotation is checked to be proper orthonormal.
class Pose3 {
 public:
  Pose3() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  Pose3(const Mat3& rotation, const Vec3& translation);

  static Pose3 identity() { return {}; }
  static Pose3 from_translation(const Vec3& t) { return {Mat3::Identity(), t}; }
  /// Rotation about +z by `yaw`, then translation.
  static Pose3 from_yaw(double yaw, const Vec3& t = Vec3::Zero());

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Vec3 transform_point(const Vec3& p) const { return rotation_ * p + translation_; }
  Vec3 transform_direction(const Vec3& d) const { return rotation_ * d; }

  Pose3 inverse() const;
  /// (a * b)(p) == a(b(p))
  friend Pose3 operator*(const Pose3& a, const Pose3& b);

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

Vec3 transform_point(const Pose3& pose, const Vec3& point);
Pose3 compose(const Pose3& a, const Pose3& b);

struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

struct PixelProjection {
  Pixel pixel;
  double depth = 0.0;  ///< Z_c, camera-frame depth (m)
};

/// Pinhole camera: Z_c [u v 1]^T = P K E [X_w 1]^T.
///
/// `extrinsics` maps world -> camera. `pixel_scale` is the metric-to-pixel
/// matrix P; its last row must be (0, 0, 1) so that Z_c stays the camera depth.
class CameraModel {
 public:
  CameraModel(const Mat3& intrinsics, const Pose3& extrinsics, int width, int height,
              const Mat3& pixel_scale = Mat3::Identity());

  /// Camera at `position` looking along heading `yaw` (rad, from +x toward +y),
  /// tilted down by `pitch` (rad, positive looks down).
  static CameraModel mounted(double fx, double fy, double cx, double cy, int width,
                             int height, const Vec3& position, double yaw, double pitch);

  const Mat3& intrinsics() const { return intrinsics_; }
  const Pose3& extrinsics() const { return extrinsics_; }
  const Mat3& pixel_scale() const { return pixel_scale_; }
  int width() const { return width_; }
  int height() const { return height_; }
  Pixel principal_point() const;
  /// Optical center in world coordinates.
  Vec3 position() const;

  std::optional<PixelProjection> try_project(const Vec3& world_point) const;
  /// Unit world-frame direction of the ray through `pixel`.
  Vec3 ray_direction(const Pixel& pixel) const;

 private:
  Mat3 intrinsics_;
  Pose3 extrinsics_;
  Mat3 pixel_scale_;
  Mat3 projection_;          // P * K
  Mat3 projection_inverse_;  // (P * K)^-1
  Pose3 camera_to_world_;
  int width_;
  int height_;
};

/// Throws GeometryError(kBehindCamera) when Z_c <= 0.
PixelProjection project_to_pixel(const CameraModel& cam, const Vec3& world_point);

/// Intersects the back-projected ray of `pixel` with the plane z = target_height.
Vec3 pixel_to_ground(const CameraModel& cam, const Pixel& pixel, double target_height);

class Box2D {
 public:
  Box2D() = default;
  Box2D(double u_min, double v_min, double u_max, double v_max);

  double u_min() const { return u_min_; }
  double v_min() const { return v_min_; }
  double u_max() const { return u_max_; }
  double v_max() const { return v_max_; }
  double width() const { return u_max_ - u_min_; }
  double height() const { return v_max_ - v_min_; }
  double area() const { return width() * height(); }
  Pixel center() const { return {0.5 * (u_min_ + u_max_), 0.5 * (v_min_ + v_max_)}; }
  Pixel bottom_center() const { return {0.5 * (u_min_ + u_max_), v_max_}; }
  /// Returns the clipped box, or nullopt when nothing of positive area remains.
  std::optional<Box2D> clipped(double width, double height) const;

  static Box2D centered(const Pixel& c, double width, double height);

 private:
  double u_min_ = 0.0;
  double v_min_ = 0.0;
  double u_max_ = 0.0;
  double v_max_ = 0.0;
};

struct Dimensions {
  double length = 0.0;
  double width = 0.0;
  double height = 0.0;
};

/// Upright box: `center` is the geometric center, yaw is about world z and the
/// length axis points along yaw.
class Box3D {
 public:
  Box3D(const Vec3& center, const Dimensions& dims, double yaw);

  const Vec3& center() const { return center_; }
  const Dimensions& dims() const { return dims_; }
  double yaw() const { return yaw_; }

  Box3D with_center(const Vec3& c) const { return {c, dims_, yaw_}; }
  Box3D with_yaw(double yaw) const { return {center_, dims_, yaw}; }

  std::array<Vec3, 8> corners() const;
  /// Ground footprint, counter-clockwise.
  std::array<Vec2, 4> footprint() const;

 private:
  Vec3 center_;
  Dimensions dims_;
  double yaw_;
};

double iou_axis_aligned(const Box2D& a, const Box2D& b);
double iou_bev(const Box3D& a, const Box3D& b);

/// Area of a simple polygon (shoelace, signed by orientation).
double polygon_area(const std::vector<Vec2>& poly);
/// Sutherland-Hodgman clip of `subject` against the convex CCW polygon `clip`.
std::vector<Vec2> clip_convex(const std::vector<Vec2>& subject, const std::vector<Vec2>& clip);
bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& poly);

}  // namespace roadfuse
