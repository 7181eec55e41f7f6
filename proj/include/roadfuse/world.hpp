#pragma once

/// \file
/// \brief Kinematic traffic stepping on the road graph: constant-speed
/// gap-keeping car-following, first-come reservations at junctions, and
/// route continuation through a provider callback.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "roadfuse/geometry.hpp"
#include "roadfuse/scenario.hpp"

namespace roadfuse {

/// Ground-truth vehicle snapshot.
struct VehicleState {
  int id = 0;
  Vec2 position = Vec2::Zero();
  double yaw = 0.0;
  double speed = 0.0;
  Vec2 velocity = Vec2::Zero();
  Dimensions dims;
  double t = 0.0;
};

/// Box3D of a vehicle resting on the ground plane.
Box3D vehicle_box(const VehicleState& v);

struct VehicleRuntime {
  int id = 0;
  Dimensions dims;
  double nominal_speed = 0.0;
  std::vector<std::size_t> route;  ///< edge indices; grows as continuations arrive
  std::size_t leg = 0;             ///< index into route
  double s = 0.0;                  ///< distance along route[leg]
  double speed = 0.0;              ///< speed over the last step
  bool exhausted = false;          ///< provider declined to extend the route
  std::size_t origin_edge = 0;     ///< respawn location
  std::optional<double> lock_request_t;  ///< when it started waiting at a junction

  std::size_t edge() const { return route[leg]; }
  bool on_last_leg() const { return leg + 1 >= route.size(); }
};

struct WorldState {
  std::int64_t step = 0;
  double t = 0.0;
  std::vector<VehicleRuntime> vehicles;  ///< sorted by id
  /// Per node: id of the vehicle holding the junction reservation, if any.
  std::vector<std::optional<int>> lock_holder;
  std::vector<char> lock_node;
};

/// Returns node ids continuing from `at_node` (first element equal to it), or
/// nullopt to let the vehicle finish its route.
using RouteProvider =
    std::function<std::optional<std::vector<int>>(const VehicleRuntime& vehicle, int at_node)>;

struct StepEvents {
  std::vector<int> route_exhausted;  ///< vehicles whose route ran out without a continuation
  std::vector<int> respawned;
};

WorldState initial_world(const ScenarioConfig& cfg);

/// Advances every vehicle by one tick in place.
///
/// Each vehicle moves at min(nominal, speed limit) scaled down linearly once
/// the free gap to its leader drops below the headway, and never closer than
/// the minimum gap. Vehicles stop short of a junction until they hold its
/// reservation. A vehicle reaching the end of its route asks `provider` for a
/// continuation when it enters its last edge; without one it reports
/// RouteExhausted and respawns at its route start.
StepEvents advance_world(const ScenarioConfig& cfg, WorldState& state, double dt,
                         const RouteProvider& provider = {});

WorldState step_world(const ScenarioConfig& cfg, const WorldState& state, double dt,
                      const RouteProvider& provider = {}, StepEvents* events = nullptr);

std::vector<VehicleState> vehicle_states(const ScenarioConfig& cfg, const WorldState& state);

/// Lane-offset position and heading of a point `s` along route leg `leg`.
std::pair<Vec2, double> lane_pose(const ScenarioConfig& cfg, const VehicleRuntime& v,
                                  std::size_t leg, double s);

/// Replaces everything after the current edge with `path` (node ids, first one
/// equal to the current edge's end node). Refused while the vehicle holds or
/// waits for a junction reservation; returns whether the route changed.
bool reroute(const ScenarioConfig& cfg, WorldState& state, int vehicle_id,
             const std::vector<int>& path);

int node_id_at_edge_end(const ScenarioConfig& cfg, std::size_t edge);

}  // namespace roadfuse
