#include "roadfuse/lidar_camera.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace roadfuse {

std::optional<Box2D> try_project_box_to_image(const Box3D& box, const CameraModel& cam) {
  double u0 = 0.0, v0 = 0.0, u1 = 0.0, v1 = 0.0;
  bool any = false;
  for (const Vec3& c : box.corners()) {
    const auto p = cam.try_project(c);
    if (!p) {
      continue;
    }
    if (!any) {
      u0 = u1 = p->pixel.u;
      v0 = v1 = p->pixel.v;
      any = true;
    } else {
      u0 = std::min(u0, p->pixel.u);
      u1 = std::max(u1, p->pixel.u);
      v0 = std::min(v0, p->pixel.v);
      v1 = std::max(v1, p->pixel.v);
    }
  }
  if (!any) {
    return std::nullopt;
  }
  const double w = cam.width();
  const double h = cam.height();
  return Box2D(std::clamp(u0, 0.0, w), std::clamp(v0, 0.0, h), std::clamp(u1, 0.0, w),
               std::clamp(v1, 0.0, h));
}

Box2D project_box_to_image(const Box3D& box, const CameraModel& cam) {
  auto b = try_project_box_to_image(box, cam);
  if (!b) {
    throw GeometryError(GeometryErrc::kFullyBehind, "all box corners are behind the camera");
  }
  return *b;
}

bool MatchLedger::is_marked(const DetectionRef& r) const {
  return std::any_of(marked.begin(), marked.end(),
                     [&](const LedgerEntry& e) { return e.detection == r; });
}

bool MatchLedger::is_masked(const DetectionRef& r) const {
  return std::any_of(masked.begin(), masked.end(),
                     [&](const LedgerEntry& e) { return e.detection == r; });
}

std::vector<std::size_t> traversal_order(std::span<const Detection3D> d3) {
  std::vector<std::size_t> order(d3.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return d3[a].confidence > d3[b].confidence;
  });
  return order;
}

std::vector<std::size_t> cameras_by_distance(const Vec3& center,
                                             std::span<const CameraModel> cams) {
  std::vector<double> dist(cams.size());
  for (std::size_t j = 0; j < cams.size(); ++j) {
    dist[j] = (center - cams[j].position()).norm();
  }
  std::vector<std::size_t> order(cams.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
  return order;
}

MatchLedger box_match(std::span<const Detection3D> d3,
                      std::span<const std::vector<Detection2D>> d2,
                      std::span<const CameraModel> cams, double gate) {
  MatchLedger ledger;
  // 0 = in pool, 1 = marked, 2 = masked
  std::vector<std::vector<char>> claimed(d2.size());
  for (std::size_t j = 0; j < d2.size(); ++j) {
    claimed[j].assign(d2[j].size(), 0);
  }
  std::vector<char> matched(d3.size(), 0);

  for (std::size_t i : traversal_order(d3)) {
    const Box3D& box = d3[i].box;
    for (std::size_t j : cameras_by_distance(box.center(), cams)) {
      if (j >= d2.size()) {
        continue;
      }
      const auto projected = try_project_box_to_image(box, cams[j]);
      if (!projected) {
        continue;
      }
      double best_iou = 0.0;
      std::optional<std::size_t> best;
      for (std::size_t k = 0; k < d2[j].size(); ++k) {
        if (claimed[j][k] != 0) {
          continue;
        }
        const Box2D& cand = d2[j][k].box;
        if (!(cand.area() > 0.0) && !(projected->area() > 0.0)) {
          continue;
        }
        const double v = iou_axis_aligned(*projected, cand);
        const bool better = !best || v > best_iou ||
                            (v == best_iou && d2[j][k].confidence > d2[j][*best].confidence);
        if (better) {
          best_iou = v;
          best = k;
        }
      }
      ledger.iou_array.push_back({i, j, best ? best_iou : 0.0});
      if (!best || best_iou < gate) {
        continue;
      }
      const DetectionRef ref{j, *best};
      if (!matched[i]) {
        matched[i] = 1;
        claimed[j][*best] = 1;
        ledger.matched_3d.push_back(i);
        ledger.marked.push_back({i, ref, best_iou});
      } else {
        claimed[j][*best] = 2;
        ledger.masked.push_back({i, ref, best_iou});
      }
    }
  }

  for (std::size_t i = 0; i < d3.size(); ++i) {
    if (!matched[i]) {
      ledger.discarded_3d.push_back(i);
    }
  }
  for (std::size_t j = 0; j < d2.size(); ++j) {
    for (std::size_t k = 0; k < d2[j].size(); ++k) {
      if (claimed[j][k] == 0) {
        ledger.discarded_2d.push_back({j, k});
      }
    }
  }
  return ledger;
}

std::optional<Vec3> camera_center_estimate(const Box3D& lidar_box, const Detection2D& det,
                                           const CameraModel& cam) {
  const auto center_px = cam.try_project(lidar_box.center());
  const auto hull = try_project_box_to_image(lidar_box, cam);
  if (!center_px || !hull) {
    return std::nullopt;
  }
  const Pixel hc = hull->center();
  const Pixel dc = det.box.center();
  const Pixel shifted{dc.u - (hc.u - center_px->pixel.u), dc.v - (hc.v - center_px->pixel.v)};
  try {
    return pixel_to_ground(cam, shifted, lidar_box.center().z());
  } catch (const GeometryError&) {
    return std::nullopt;
  }
}

std::optional<double> reprojected_aspect(const Box3D& box, std::span<const DetectionRef> refs,
                                         std::span<const std::vector<Detection2D>> d2,
                                         std::span<const CameraModel> cams) {
  double acc = 0.0;
  double wsum = 0.0;
  for (const auto& r : refs) {
    const auto hull = try_project_box_to_image(box, cams[r.camera]);
    if (!hull || !(hull->height() > 0.0)) {
      continue;
    }
    const double w = d2[r.camera][r.index].confidence;
    acc += w * hull->width() / hull->height();
    wsum += w;
  }
  if (!(wsum > 0.0)) {
    return std::nullopt;
  }
  return acc / wsum;
}

namespace {

std::optional<double> detected_aspect(std::span<const DetectionRef> refs,
                                      std::span<const std::vector<Detection2D>> d2) {
  double acc = 0.0;
  double wsum = 0.0;
  for (const auto& r : refs) {
    const auto& det = d2[r.camera][r.index];
    if (!(det.box.height() > 0.0)) {
      continue;
    }
    acc += det.confidence * det.box.width() / det.box.height();
    wsum += det.confidence;
  }
  if (!(wsum > 0.0)) {
    return std::nullopt;
  }
  return acc / wsum;
}

}  // namespace

double refine_yaw(const Box3D& box, std::span<const DetectionRef> refs,
                  std::span<const std::vector<Detection2D>> d2, std::span<const CameraModel> cams,
                  const MergeParams& params) {
  const auto target = detected_aspect(refs, d2);
  if (!target || !(params.yaw_step > 0.0)) {
    return box.yaw();
  }
  const int steps = static_cast<int>(std::floor(params.yaw_range / params.yaw_step + 1e-9));
  double best_yaw = box.yaw();
  double best_diff = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 2 * steps; ++k) {
    // 0, +1, -1, +2, -2, ...
    const int n = (k + 1) / 2;
    const double offset = (k % 2 == 1 ? 1.0 : -1.0) * n * params.yaw_step;
    const double yaw = box.yaw() + (k == 0 ? 0.0 : offset);
    const auto ratio = reprojected_aspect(box.with_yaw(yaw), refs, d2, cams);
    if (!ratio) {
      continue;
    }
    const double diff = std::abs(*ratio - *target);
    if (diff < best_diff) {
      best_diff = diff;
      best_yaw = yaw;
    }
    if (diff <= params.aspect_tolerance) {
      break;
    }
  }
  return normalize_angle(best_yaw);
}

std::vector<MergedBox> merge_boxes(const MatchLedger& ledger, std::span<const Detection3D> d3,
                                   std::span<const std::vector<Detection2D>> d2,
                                   std::span<const CameraModel> cams, const MergeParams& params) {
  std::vector<MergedBox> out;
  out.reserve(ledger.marked.size());
  for (const auto& mark : ledger.marked) {
    const Detection3D& lidar = d3[mark.box3d];
    std::vector<DetectionRef> refs{mark.detection};
    for (const auto& m : ledger.masked) {
      if (m.box3d == mark.box3d) {
        refs.push_back(m.detection);
      }
    }

    Vec3 cam_acc = Vec3::Zero();
    double cam_w = 0.0;
    double conf_acc = lidar.confidence;
    for (const auto& r : refs) {
      const auto& det = d2[r.camera][r.index];
      conf_acc += det.confidence;
      if (const auto c = camera_center_estimate(lidar.box, det, cams[r.camera])) {
        cam_acc += det.confidence * *c;
        cam_w += det.confidence;
      }
    }
    Vec3 center = lidar.box.center();
    if (cam_w > 0.0) {
      const Vec3 cam_center = cam_acc / cam_w;
      const double w = params.lidar_weight;
      center.head<2>() = w * lidar.box.center().head<2>() + (1.0 - w) * cam_center.head<2>();
    }
    const Box3D placed = lidar.box.with_center(center);
    const double yaw = refine_yaw(placed, refs, d2, cams, params);

    MergedBox mb{placed.with_yaw(yaw), mark.box3d, refs,
                 conf_acc / static_cast<double>(refs.size() + 1), MatchStatus::kMatched};
    out.push_back(std::move(mb));
  }
  if (params.keep_unmatched_3d) {
    for (std::size_t i : ledger.discarded_3d) {
      out.push_back({d3[i].box, i, {}, d3[i].confidence, MatchStatus::kUnmatched3dKept});
    }
  }
  return out;
}

}  // namespace roadfuse
