#include "roadfuse/emulators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "roadfuse/lidar_camera.hpp"

namespace roadfuse {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng make_substream(std::uint64_t master_seed, const std::string& name) {
  // FNV-1a over the name, then mixed with the master seed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return Rng(splitmix64(splitmix64(master_seed) ^ h));
}

bool fires_at(double rate, double tick, std::int64_t step) {
  if (step <= 0) return step == 0;
  const auto count = [&](std::int64_t n) {
    return static_cast<std::int64_t>(std::floor(static_cast<double>(n) * tick * rate + 1e-9));
  };
  return count(step) > count(step - 1);
}

double lidar_confidence(double distance) { return std::clamp(0.95 - 0.02 * distance, 0.1, 0.99); }

double camera_confidence(double depth) { return std::clamp(0.9 - 0.01 * depth, 0.3, 0.99); }

namespace {

double gauss(Rng& rng, double sigma) {
  if (!(sigma > 0.0)) return 0.0;
  return std::normal_distribution<double>(0.0, sigma)(rng);
}

bool bernoulli(Rng& rng, double p) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  return u < p;
}

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace

StampedFrame sense_camera(const SensorRig& rig, std::span<const VehicleState> vehicles,
                          const CameraNoise& noise, Rng& rng, double t) {
  if (rig.kind != SensorKind::kCamera || !rig.camera) {
    throw std::invalid_argument("sense_camera needs a camera rig");
  }
  const CameraModel& cam = *rig.camera;
  std::vector<Detection2D> out;
  for (const auto& v : vehicles) {
    const Box3D box = vehicle_box(v);
    bool in_front = true;
    for (const Vec3& c : box.corners()) {
      if (!cam.try_project(c)) {
        in_front = false;
        break;
      }
    }
    if (!in_front) continue;
    const auto hull = try_project_box_to_image(box, cam);
    if (!hull || !(hull->area() > 0.0)) continue;
    const double depth = cam.try_project(box.center())->depth;

    const double j0 = gauss(rng, noise.pixel_sigma);
    const double j1 = gauss(rng, noise.pixel_sigma);
    const double j2 = gauss(rng, noise.pixel_sigma);
    const double j3 = gauss(rng, noise.pixel_sigma);
    const bool missed = bernoulli(rng, noise.miss_rate);
    const double conf = std::clamp(camera_confidence(depth) + uniform(rng, -0.02, 0.02), 0.0, 1.0);
    if (missed) continue;

    const double u0 = hull->u_min() + j0;
    const double v0 = hull->v_min() + j1;
    const double u1 = hull->u_max() + j2;
    const double v1 = hull->v_max() + j3;
    const auto jittered = Box2D(std::min(u0, u1), std::min(v0, v1), std::max(u0, u1),
                                std::max(v0, v1))
                              .clipped(cam.width(), cam.height());
    if (!jittered) continue;
    out.push_back({rig.id, *jittered, "vehicle", conf, v.id});
  }
  if (bernoulli(rng, noise.false_positive_rate)) {
    const double w = uniform(rng, 20.0, 200.0);
    const double h = uniform(rng, 15.0, 120.0);
    const double u = uniform(rng, 0.0, cam.width() - w);
    const double vv = uniform(rng, 0.0, cam.height() - h);
    const double conf = uniform(rng, 0.3, 0.9);
    out.push_back({rig.id, Box2D(u, vv, u + w, vv + h), "vehicle", conf, -1});
  }
  return {rig.id, t, std::move(out)};
}

StampedFrame sense_radar(const SensorRig& rig, std::span<const VehicleState> vehicles,
                         const RadarNoise& noise, Rng& rng, double t) {
  if (rig.kind != SensorKind::kRadar) {
    throw std::invalid_argument("sense_radar needs a radar rig");
  }
  const Pose3 world_to_radar = rig.pose.inverse();
  const Vec3 origin = rig.pose.translation();
  std::vector<RadarPoint> out;
  for (const auto& v : vehicles) {
    const Vec3 world{v.position.x(), v.position.y(), 0.5 * v.dims.height};
    const Vec3 local = world_to_radar.transform_point(world);
    const double range = std::hypot(local.x(), local.y());
    const double az = std::atan2(local.y(), local.x());
    if (!(range > 0.0) || range > rig.radar.max_range || std::abs(az) > rig.radar.fov_half_angle) {
      continue;
    }
    Vec2 ray = (world - origin).head<2>();
    ray /= ray.norm();
    const double vr = v.velocity.dot(ray);

    const double pos_sigma = std::sqrt(noise.position_variance);
    const double nx = local.x() + gauss(rng, pos_sigma);
    const double ny = local.y() + gauss(rng, pos_sigma);
    RadarPoint p;
    p.range = std::max(std::hypot(nx, ny) + gauss(rng, noise.range_sigma), 1e-3);
    p.azimuth = std::clamp(std::atan2(ny, nx) + gauss(rng, noise.azimuth_sigma),
                           -rig.radar.fov_half_angle, rig.radar.fov_half_angle);
    p.radial_velocity = vr + gauss(rng, noise.velocity_sigma);
    p.source_vehicle = v.id;
    out.push_back(p);
  }
  return {rig.id, t, std::move(out)};
}

StampedFrame sense_lidar(const SensorRig& rig, std::span<const VehicleState> vehicles,
                         const LidarNoise& noise, Rng& rng, double t) {
  if (rig.kind != SensorKind::kLidar) {
    throw std::invalid_argument("sense_lidar needs a lidar rig");
  }
  const Pose3 world_to_lidar = rig.pose.inverse();
  const LidarParams& lp = rig.lidar;
  std::vector<Detection3D> out;
  for (const auto& v : vehicles) {
    const Box3D truth = vehicle_box(v);
    const Vec3 local = world_to_lidar.transform_point(truth.center());
    const double dist = std::hypot(local.x(), local.y());
    const bool inside = (local.array() >= lp.volume_min.array()).all() &&
                        (local.array() <= lp.volume_max.array()).all();
    if (!inside || dist < lp.min_range || dist > lp.max_range) continue;

    const Vec3 dc{gauss(rng, noise.center_sigma), gauss(rng, noise.center_sigma),
                  gauss(rng, noise.center_sigma)};
    const double dyaw = gauss(rng, noise.yaw_sigma);
    const Dimensions dd{gauss(rng, noise.dimension_sigma), gauss(rng, noise.dimension_sigma),
                        gauss(rng, noise.dimension_sigma)};
    const bool missed = bernoulli(rng, noise.miss_rate);
    const double conf = std::clamp(lidar_confidence(dist) + uniform(rng, -0.02, 0.02), 0.0, 1.0);
    if (missed) continue;

    const Dimensions& d = truth.dims();
    const Dimensions dims{std::max(d.length + dd.length, 0.01), std::max(d.width + dd.width, 0.01),
                          std::max(d.height + dd.height, 0.01)};
    out.push_back({Box3D(truth.center() + dc, dims, truth.yaw() + dyaw), "vehicle", conf, v.id});
  }
  return {rig.id, t, std::move(out)};
}

StampedFrame sense(const SensorRig& rig, std::span<const VehicleState> vehicles,
                   const NoiseProfile& noise, Rng& rng, double t) {
  switch (rig.kind) {
    case SensorKind::kCamera:
      return sense_camera(rig, vehicles, noise.camera, rng, t);
    case SensorKind::kRadar:
      return sense_radar(rig, vehicles, noise.radar, rng, t);
    case SensorKind::kLidar:
      return sense_lidar(rig, vehicles, noise.lidar, rng, t);
  }
  throw std::logic_error("unknown sensor kind");
}

}  // namespace roadfuse
