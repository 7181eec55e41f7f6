#include "roadfuse/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace roadfuse {

double normalize_angle(double a) {
  constexpr double kPi = std::numbers::pi;
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  if (!std::isfinite(a) || (a > -kPi && a <= kPi)) {
    return a;
  }
  double r = std::fmod(a + kPi, kTwoPi);
  if (r < 0.0) {
    r += kTwoPi;
  }
  r -= kPi;
  // fmod maps odd multiples of pi onto -pi; the canonical form is +pi.
  if (r <= -kPi) {
    r = kPi;
  }
  return r;
}

Pose3::Pose3(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).norm();
  if (!(ortho < 1e-9) || !(std::abs(rotation.determinant() - 1.0) < 1e-9)) {
    throw GeometryError(GeometryErrc::kInvalidPose, "rotation is not proper orthonormal");
  }
  if (!translation.allFinite()) {
    throw GeometryError(GeometryErrc::kInvalidPose, "translation is not finite");
  }
}

Pose3 Pose3::from_yaw(double yaw, const Vec3& t) {
  return {Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix(), t};
}

Pose3 Pose3::inverse() const {
  const Mat3 rt = rotation_.transpose();
  Pose3 out;
  out.rotation_ = rt;
  out.translation_ = -(rt * translation_);
  return out;
}

Pose3 operator*(const Pose3& a, const Pose3& b) {
  Pose3 out;
  out.rotation_ = a.rotation_ * b.rotation_;
  out.translation_ = a.rotation_ * b.translation_ + a.translation_;
  return out;
}

Vec3 transform_point(const Pose3& pose, const Vec3& point) { return pose.transform_point(point); }

Pose3 compose(const Pose3& a, const Pose3& b) { return a * b; }

CameraModel::CameraModel(const Mat3& intrinsics, const Pose3& extrinsics, int width, int height,
                         const Mat3& pixel_scale)
    : intrinsics_(intrinsics),
      extrinsics_(extrinsics),
      pixel_scale_(pixel_scale),
      camera_to_world_(extrinsics.inverse()),
      width_(width),
      height_(height) {
  if (width <= 0 || height <= 0) {
    throw GeometryError(GeometryErrc::kInvalidCamera, "image size must be positive");
  }
  if (!(intrinsics(0, 0) > 0.0) || !(intrinsics(1, 1) > 0.0)) {
    throw GeometryError(GeometryErrc::kInvalidCamera, "focal lengths must be positive");
  }
  if (pixel_scale(2, 0) != 0.0 || pixel_scale(2, 1) != 0.0 || pixel_scale(2, 2) != 1.0) {
    throw GeometryError(GeometryErrc::kInvalidCamera, "pixel scale last row must be (0, 0, 1)");
  }
  projection_ = pixel_scale_ * intrinsics_;
  if (std::abs(projection_.determinant()) < 1e-12) {
    throw GeometryError(GeometryErrc::kInvalidCamera, "projection matrix is singular");
  }
  projection_inverse_ = projection_.inverse();
  const Pixel pp = principal_point();
  if (pp.u < 0.0 || pp.u > width || pp.v < 0.0 || pp.v > height) {
    throw GeometryError(GeometryErrc::kInvalidCamera, "principal point outside the image");
  }
}

CameraModel CameraModel::mounted(double fx, double fy, double cx, double cy, int width, int height,
                                 const Vec3& position, double yaw, double pitch) {
  const Vec3 forward(std::cos(pitch) * std::cos(yaw), std::cos(pitch) * std::sin(yaw),
                     -std::sin(pitch));
  const Vec3 right(std::sin(yaw), -std::cos(yaw), 0.0);
  const Vec3 down = forward.cross(right);
  Mat3 cam_to_world;
  cam_to_world.col(0) = right;
  cam_to_world.col(1) = down;
  cam_to_world.col(2) = forward;
  const Pose3 world_to_cam = Pose3(cam_to_world, position).inverse();
  Mat3 k = Mat3::Identity();
  k(0, 0) = fx;
  k(1, 1) = fy;
  k(0, 2) = cx;
  k(1, 2) = cy;
  return {k, world_to_cam, width, height};
}

Pixel CameraModel::principal_point() const {
  const Vec3 h = projection_ * Vec3::UnitZ();
  return {h.x() / h.z(), h.y() / h.z()};
}

Vec3 CameraModel::position() const { return camera_to_world_.translation(); }

std::optional<PixelProjection> CameraModel::try_project(const Vec3& world_point) const {
  const Vec3 pc = extrinsics_.transform_point(world_point);
  if (!(pc.z() > 0.0)) {
    return std::nullopt;
  }
  const Vec3 h = projection_ * pc;
  return PixelProjection{{h.x() / h.z(), h.y() / h.z()}, pc.z()};
}

Vec3 CameraModel::ray_direction(const Pixel& pixel) const {
  const Vec3 ray_cam = projection_inverse_ * Vec3(pixel.u, pixel.v, 1.0);
  return camera_to_world_.transform_direction(ray_cam).normalized();
}

PixelProjection project_to_pixel(const CameraModel& cam, const Vec3& world_point) {
  auto p = cam.try_project(world_point);
  if (!p) {
    throw GeometryError(GeometryErrc::kBehindCamera, "point is behind the camera");
  }
  return *p;
}

Vec3 pixel_to_ground(const CameraModel& cam, const Pixel& pixel, double target_height) {
  const Vec3 dir = cam.ray_direction(pixel);
  if (std::abs(dir.z()) < 1e-9) {
    throw GeometryError(GeometryErrc::kRayParallel, "pixel ray is parallel to the target plane");
  }
  const Vec3 origin = cam.position();
  const double t = (target_height - origin.z()) / dir.z();
  if (!(t > 0.0)) {
    throw GeometryError(GeometryErrc::kBehindCamera, "target plane intersects behind the camera");
  }
  return origin + t * dir;
}

Box2D::Box2D(double u_min, double v_min, double u_max, double v_max)
    : u_min_(u_min), v_min_(v_min), u_max_(u_max), v_max_(v_max) {
  if (!(u_min <= u_max) || !(v_min <= v_max)) {
    throw GeometryError(GeometryErrc::kInvalidBox, "box min corner exceeds max corner");
  }
}

std::optional<Box2D> Box2D::clipped(double width, double height) const {
  const double u0 = std::clamp(u_min_, 0.0, width);
  const double u1 = std::clamp(u_max_, 0.0, width);
  const double v0 = std::clamp(v_min_, 0.0, height);
  const double v1 = std::clamp(v_max_, 0.0, height);
  if (!(u1 > u0) || !(v1 > v0)) {
    return std::nullopt;
  }
  return Box2D(u0, v0, u1, v1);
}

Box2D Box2D::centered(const Pixel& c, double width, double height) {
  return {c.u - 0.5 * width, c.v - 0.5 * height, c.u + 0.5 * width, c.v + 0.5 * height};
}

Box3D::Box3D(const Vec3& center, const Dimensions& dims, double yaw)
    : center_(center), dims_(dims), yaw_(normalize_angle(yaw)) {
  if (!(dims.length > 0.0) || !(dims.width > 0.0) || !(dims.height > 0.0)) {
    throw GeometryError(GeometryErrc::kInvalidBox, "box dimensions must be positive");
  }
  if (!center.allFinite() || !std::isfinite(yaw)) {
    throw GeometryError(GeometryErrc::kInvalidBox, "box pose is not finite");
  }
}

std::array<Vec2, 4> Box3D::footprint() const {
  const double c = std::cos(yaw_);
  const double s = std::sin(yaw_);
  const double hl = 0.5 * dims_.length;
  const double hw = 0.5 * dims_.width;
  const Vec2 ctr(center_.x(), center_.y());
  const Vec2 ax(c, s);
  const Vec2 ay(-s, c);
  return {ctr + hl * ax + hw * ay, ctr - hl * ax + hw * ay, ctr - hl * ax - hw * ay,
          ctr + hl * ax - hw * ay};
}

std::array<Vec3, 8> Box3D::corners() const {
  const auto fp = footprint();
  const double z0 = center_.z() - 0.5 * dims_.height;
  const double z1 = center_.z() + 0.5 * dims_.height;
  std::array<Vec3, 8> out;
  for (int i = 0; i < 4; ++i) {
    out[i] = Vec3(fp[i].x(), fp[i].y(), z0);
    out[i + 4] = Vec3(fp[i].x(), fp[i].y(), z1);
  }
  return out;
}

double iou_axis_aligned(const Box2D& a, const Box2D& b) {
  const double iw = std::min(a.u_max(), b.u_max()) - std::max(a.u_min(), b.u_min());
  const double ih = std::min(a.v_max(), b.v_max()) - std::max(a.v_min(), b.v_min());
  const double inter = (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
  const double uni = a.area() + b.area() - inter;
  if (!(uni > 0.0)) {
    throw GeometryError(GeometryErrc::kZeroUnion, "both boxes are degenerate");
  }
  return inter / uni;
}

double polygon_area(const std::vector<Vec2>& poly) {
  double acc = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % n];
    acc += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * acc;
}

namespace {

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

}  // namespace

std::vector<Vec2> clip_convex(const std::vector<Vec2>& subject, const std::vector<Vec2>& clip) {
  std::vector<Vec2> out = subject;
  const std::size_t m = clip.size();
  for (std::size_t e = 0; e < m && !out.empty(); ++e) {
    const Vec2& a = clip[e];
    const Vec2& b = clip[(e + 1) % m];
    const Vec2 edge = b - a;
    std::vector<Vec2> in = std::move(out);
    out.clear();
    for (std::size_t i = 0; i < in.size(); ++i) {
      const Vec2& p = in[i];
      const Vec2& q = in[(i + 1) % in.size()];
      const double sp = cross2(edge, p - a);
      const double sq = cross2(edge, q - a);
      if (sp >= 0.0) {
        out.push_back(p);
      }
      if ((sp >= 0.0) != (sq >= 0.0)) {
        const double t = sp / (sp - sq);
        out.push_back(p + t * (q - p));
      }
    }
  }
  return out;
}

namespace {

// Total order on boxes so that clipping always runs in the same direction and
// iou_bev(a, b) == iou_bev(b, a) bit for bit.
bool box_less(const Box3D& a, const Box3D& b) {
  const std::array<double, 7> ka{a.center().x(), a.center().y(), a.center().z(), a.dims().length,
                                 a.dims().width, a.dims().height, a.yaw()};
  const std::array<double, 7> kb{b.center().x(), b.center().y(), b.center().z(), b.dims().length,
                                 b.dims().width, b.dims().height, b.yaw()};
  return ka < kb;
}

}  // namespace

double iou_bev(const Box3D& a_in, const Box3D& b_in) {
  const bool swap = box_less(b_in, a_in);
  const Box3D& a = swap ? b_in : a_in;
  const Box3D& b = swap ? a_in : b_in;
  const auto fa = a.footprint();
  const auto fb = b.footprint();
  const std::vector<Vec2> pa(fa.begin(), fa.end());
  const std::vector<Vec2> pb(fb.begin(), fb.end());
  const auto inter_poly = clip_convex(pa, pb);
  const double inter = inter_poly.size() >= 3 ? std::abs(polygon_area(inter_poly)) : 0.0;
  const double area_a = a.dims().length * a.dims().width;
  const double area_b = b.dims().length * b.dims().width;
  const double uni = area_a + area_b - inter;
  if (!(uni > 0.0)) {
    throw GeometryError(GeometryErrc::kZeroUnion, "both footprints are degenerate");
  }
  return std::clamp(inter / uni, 0.0, 1.0);
}

bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& poly) {
  const std::size_t n = poly.size();
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    // on-edge counts as inside
    const Vec2 ab = b - a;
    const Vec2 ap = p - a;
    if (std::abs(cross2(ab, ap)) <= 1e-12 * std::max(1.0, ab.norm()) && ap.dot(ab) >= 0.0 &&
        ap.dot(ab) <= ab.squaredNorm()) {
      return true;
    }
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x) {
        inside = !inside;
      }
    }
  }
  return inside;
}

}  // namespace roadfuse
