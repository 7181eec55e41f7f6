#pragma once

/// \file
/// \brief Cooperative layer: agent regions, per-segment density/speed maps
/// built from fused output, congestion-aware routing and intersection flow
/// counting.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "roadfuse/emulators.hpp"
#include "roadfuse/scenario.hpp"
#include "roadfuse/world.hpp"

namespace roadfuse {

class Unreachable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AgentRegion {
  std::string id;
  std::vector<Vec2> polygon;
  std::vector<std::string> rigs;
  std::vector<std::size_t> segments;  ///< edge indices
};

/// Edge i is owned by the first region (in list order) whose polygon contains
/// the edge midpoint, boundary included. Throws std::invalid_argument when a
/// segment falls in no region.
std::vector<AgentRegion> assign_agents(const RoadGraph& graph,
                                       std::span<const AgentRegionSpec> regions,
                                       std::span<const SensorRig> rigs = {});

/// Owner index per edge from the output of assign_agents.
std::vector<std::size_t> ownership_table(const RoadGraph& graph,
                                         std::span<const AgentRegion> regions);

struct SegmentLoad {
  double count = 0.0;                ///< mean records per frame over the window
  std::optional<double> mean_speed;  ///< over records that carried a speed
  double t = 0.0;
};

struct DensitySpeedMap {
  std::vector<SegmentLoad> segments;  ///< per edge
  std::size_t unsnapped = 0;          ///< off-road records in the window
  double t = 0.0;

  static DensitySpeedMap empty(const RoadGraph& graph);
  double total_count() const;
};

/// One fused record as seen by the density map.
struct DensityRecord {
  Vec2 position = Vec2::Zero();
  std::optional<Vec2> velocity;  ///< heading hint and speed when known
};

/// Nearest lane line (right-hand offset of each directed edge) within
/// `max_distance`. A known velocity rules out lanes pointing against it.
/// Ties go to the lower edge index.
std::optional<std::size_t> snap_to_segment(const ScenarioConfig& cfg, const DensityRecord& r,
                                           double max_distance);

/// Sliding-window accumulator for one agent.
class DensityTracker {
 public:
  DensityTracker(const ScenarioConfig& cfg, double window, double snap_distance);

  /// Adds one fused frame at time t and evicts frames older than t - window.
  void add_frame(double t, std::span<const DensityRecord> records);
  DensitySpeedMap snapshot() const;

 private:
  struct Entry {
    std::size_t edge;
    std::optional<double> speed;
  };
  struct Frame {
    double t;
    std::vector<Entry> entries;
    std::size_t unsnapped;
  };
  const ScenarioConfig* cfg_;
  double window_;
  double snap_;
  std::deque<Frame> frames_;
};

DensitySpeedMap update_density(DensityTracker& tracker, std::span<const DensityRecord> records,
                               double t);

/// Per-edge merge of agent snapshots: the owning agent's entry when it saw
/// anything, otherwise the busiest other agent's (lower index on ties). A
/// vehicle seen by two agents is therefore counted once per segment.
DensitySpeedMap aggregate_maps(std::span<const DensitySpeedMap> agent_maps,
                               std::span<const std::size_t> owner);

/// Speed from nearest-neighbor displacement against a position set about
/// `lag` seconds old.
class MotionEstimator {
 public:
  explicit MotionEstimator(double lag = 0.5, double gate = 0.4) : lag_(lag), gate_(gate) {}

  /// Velocities for `positions` at time t (nullopt until history is deep
  /// enough or nothing is within the gate); then records this frame.
  std::vector<std::optional<Vec2>> observe(double t, std::span<const Vec2> positions);

 private:
  double lag_;
  double gate_;
  std::deque<std::pair<double, std::vector<Vec2>>> history_;
};

struct RoutingParams {
  double lambda = 0.5;       ///< s per vehicle
  double speed_floor = 0.05;  ///< m/s
  /// Assumed speed on segments without speed data. One value for the whole
  /// graph, so an empty map ranks paths by length alone.
  double free_speed = 0.5;   ///< m/s
};

double edge_cost(const RoadGraph& graph, std::size_t edge, const DensitySpeedMap& map,
                 const RoutingParams& params);

/// Least-cost edge path between node indices under
/// length / max(mean speed, floor) + lambda * count, with `free_speed`
/// standing in for segments without speed data. Equal costs resolve to the
/// lexicographically smallest node-id sequence. `avoid_first_hop` forbids
/// the step origin -> that node unless it is the only way.
std::vector<std::size_t> plan_route(const RoadGraph& graph, std::size_t origin,
                                    std::size_t destination, const DensitySpeedMap& map,
                                    const RoutingParams& params,
                                    std::optional<std::size_t> avoid_first_hop = std::nullopt);

double path_cost(const RoadGraph& graph, std::span<const std::size_t> edges,
                 const DensitySpeedMap& map, const RoutingParams& params);

/// Debounced zone-entry counting: one count each time a vehicle goes from
/// outside a zone to inside it.
class FlowCounter {
 public:
  explicit FlowCounter(std::vector<IntersectionZone> zones);

  void observe(int vehicle_id, const Vec2& position);
  const std::vector<IntersectionZone>& zones() const { return zones_; }
  const std::vector<std::int64_t>& counts() const { return counts_; }
  std::int64_t total() const;
  std::int64_t peak() const;

 private:
  std::vector<IntersectionZone> zones_;
  std::vector<std::int64_t> counts_;
  std::map<int, std::vector<char>> inside_;
};

/// Batch form: each trajectory is a timestamp-ordered position list.
FlowCounter count_flows(FlowCounter counter, const std::map<int, std::vector<Vec2>>& trajectories);

enum class RoutingMode { kRandom, kScheduled };
const char* to_string(RoutingMode m);
RoutingMode routing_mode_from_string(const std::string& s);

/// Per-vehicle trip planning. Destinations are drawn from a per-vehicle
/// stream; random mode routes by distance only, scheduled mode by the latest
/// aggregated density map and replans periodically.
class TripController {
 public:
  TripController(const ScenarioConfig& cfg, RoutingMode mode, std::uint64_t seed);

  RouteProvider provider();
  /// Scheduled mode only: install the newest aggregated map.
  void set_map(DensitySpeedMap map);
  /// Scheduled mode only: reroute every vehicle whose period has elapsed.
  void replan(WorldState& world);

  RoutingMode mode() const { return mode_; }
  std::size_t reroutes() const { return reroutes_; }
  /// Records that reached the planner through fused maps.
  double records_consumed() const { return records_consumed_; }

 private:
  std::optional<std::vector<int>> continue_route(const VehicleRuntime& v, int at_node);
  std::size_t draw_destination(int vehicle_id, std::size_t at);
  std::vector<int> node_path(std::size_t from, const std::vector<std::size_t>& edges) const;
  const DensitySpeedMap& active_map() const;

  const ScenarioConfig* cfg_;
  RoutingMode mode_;
  RoutingParams params_;
  DensitySpeedMap empty_;
  DensitySpeedMap map_;
  std::map<int, Rng> rngs_;
  std::map<int, std::size_t> destination_;
  std::map<int, double> last_replan_;
  std::size_t reroutes_ = 0;
  double records_consumed_ = 0.0;
};

}  // namespace roadfuse
