#include "roadfuse/scheduling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace roadfuse {

std::vector<AgentRegion> assign_agents(const RoadGraph& graph,
                                       std::span<const AgentRegionSpec> regions,
                                       std::span<const SensorRig> rigs) {
  if (regions.empty()) throw std::invalid_argument("no agent regions");
  std::vector<AgentRegion> out;
  for (const auto& r : regions) {
    AgentRegion a;
    a.id = r.id;
    a.polygon = r.polygon;
    for (const auto& rig : rigs) {
      if (rig.agent_id == r.id) a.rigs.push_back(rig.id);
    }
    out.push_back(std::move(a));
  }
  for (std::size_t e = 0; e < graph.edges().size(); ++e) {
    const Vec2 mid = 0.5 * (graph.edge_start(e) + graph.edge_end(e));
    bool owned = false;
    for (auto& a : out) {
      if (point_in_polygon(mid, a.polygon)) {
        a.segments.push_back(e);
        owned = true;
        break;
      }
    }
    if (!owned) {
      throw std::invalid_argument("segment " + std::to_string(e) + " lies in no agent region");
    }
  }
  return out;
}

std::vector<std::size_t> ownership_table(const RoadGraph& graph,
                                         std::span<const AgentRegion> regions) {
  std::vector<std::size_t> owner(graph.edges().size(), regions.size());
  for (std::size_t a = 0; a < regions.size(); ++a) {
    for (std::size_t e : regions[a].segments) owner.at(e) = a;
  }
  return owner;
}

DensitySpeedMap DensitySpeedMap::empty(const RoadGraph& graph) {
  DensitySpeedMap m;
  m.segments.resize(graph.edges().size());
  return m;
}

double DensitySpeedMap::total_count() const {
  double n = 0.0;
  for (const auto& s : segments) n += s.count;
  return n;
}

std::optional<std::size_t> snap_to_segment(const ScenarioConfig& cfg, const DensityRecord& r,
                                           double max_distance) {
  const RoadGraph& g = cfg.graph;
  const double off = cfg.traffic.lane_offset;
  std::optional<std::size_t> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < g.edges().size(); ++e) {
    const Vec2 a0 = g.edge_start(e);
    const Vec2 b0 = g.edge_end(e);
    const Vec2 dir = (b0 - a0).normalized();
    if (r.velocity && r.velocity->norm() > 0.05 && dir.dot(*r.velocity) < 0.0) continue;
    const Vec2 n{dir.y(), -dir.x()};
    const Vec2 a = a0 + off * n;
    const Vec2 b = b0 + off * n;
    const Vec2 ab = b - a;
    const double f = std::clamp((r.position - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    const double d = (r.position - (a + f * ab)).norm();
    if (d <= max_distance && d < best_d) {
      best_d = d;
      best = e;
    }
  }
  return best;
}

DensityTracker::DensityTracker(const ScenarioConfig& cfg, double window, double snap_distance)
    : cfg_(&cfg), window_(window), snap_(snap_distance) {
  if (!(window > 0.0)) throw std::invalid_argument("density window must be > 0");
}

void DensityTracker::add_frame(double t, std::span<const DensityRecord> records) {
  Frame f{t, {}, 0};
  for (const auto& r : records) {
    const auto e = snap_to_segment(*cfg_, r, snap_);
    if (!e) {
      ++f.unsnapped;
      continue;
    }
    std::optional<double> speed;
    if (r.velocity) speed = r.velocity->norm();
    f.entries.push_back({*e, speed});
  }
  frames_.push_back(std::move(f));
  while (!frames_.empty() && frames_.front().t <= t - window_) frames_.pop_front();
}

DensitySpeedMap DensityTracker::snapshot() const {
  DensitySpeedMap m = DensitySpeedMap::empty(cfg_->graph);
  if (frames_.empty()) return m;
  m.t = frames_.back().t;
  std::vector<double> records(m.segments.size(), 0.0);
  std::vector<double> speed_sum(m.segments.size(), 0.0);
  std::vector<double> speed_n(m.segments.size(), 0.0);
  for (const auto& f : frames_) {
    m.unsnapped += f.unsnapped;
    for (const auto& e : f.entries) {
      records[e.edge] += 1.0;
      if (e.speed) {
        speed_sum[e.edge] += *e.speed;
        speed_n[e.edge] += 1.0;
      }
    }
  }
  const double frames = static_cast<double>(frames_.size());
  for (std::size_t e = 0; e < m.segments.size(); ++e) {
    m.segments[e].count = records[e] / frames;
    m.segments[e].t = m.t;
    if (speed_n[e] > 0.0) m.segments[e].mean_speed = speed_sum[e] / speed_n[e];
  }
  return m;
}

DensitySpeedMap update_density(DensityTracker& tracker, std::span<const DensityRecord> records,
                               double t) {
  tracker.add_frame(t, records);
  return tracker.snapshot();
}

DensitySpeedMap aggregate_maps(std::span<const DensitySpeedMap> agent_maps,
                               std::span<const std::size_t> owner) {
  DensitySpeedMap out;
  if (agent_maps.empty()) return out;
  out.segments.resize(owner.size());
  for (const auto& m : agent_maps) {
    out.unsnapped += m.unsnapped;
    out.t = std::max(out.t, m.t);
  }
  for (std::size_t e = 0; e < owner.size(); ++e) {
    const std::size_t own = owner[e];
    if (own < agent_maps.size() && agent_maps[own].segments.at(e).count > 0.0) {
      out.segments[e] = agent_maps[own].segments[e];
      continue;
    }
    std::optional<std::size_t> best;
    for (std::size_t a = 0; a < agent_maps.size(); ++a) {
      const auto& s = agent_maps[a].segments.at(e);
      if (s.count > 0.0 && (!best || s.count > agent_maps[*best].segments[e].count)) best = a;
    }
    if (best) out.segments[e] = agent_maps[*best].segments[e];
  }
  return out;
}

std::vector<std::optional<Vec2>> MotionEstimator::observe(double t, std::span<const Vec2> positions) {
  // Latest stored frame that is at least `lag` old.
  const std::pair<double, std::vector<Vec2>>* ref = nullptr;
  for (const auto& h : history_) {
    if (h.first <= t - lag_ + 1e-9) ref = &h;
  }
  std::vector<std::optional<Vec2>> out(positions.size());
  if (ref) {
    const double dt = t - ref->first;
    for (std::size_t i = 0; i < positions.size(); ++i) {
      double best = gate_;
      for (const Vec2& old : ref->second) {
        const double d = (positions[i] - old).norm();
        if (d <= best) {
          best = d;
          out[i] = (positions[i] - old) / dt;
        }
      }
    }
  }
  history_.emplace_back(t, std::vector<Vec2>(positions.begin(), positions.end()));
  while (history_.size() >= 2 && history_[1].first <= t - lag_ + 1e-9) history_.pop_front();
  return out;
}

double edge_cost(const RoadGraph& graph, std::size_t edge, const DensitySpeedMap& map,
                 const RoutingParams& params) {
  const RoadEdge& e = graph.edges()[edge];
  double speed = params.free_speed;
  double count = 0.0;
  if (edge < map.segments.size()) {
    const auto& s = map.segments[edge];
    if (s.mean_speed) speed = *s.mean_speed;
    count = s.count;
  }
  return e.length / std::max(speed, params.speed_floor) + params.lambda * count;
}

double path_cost(const RoadGraph& graph, std::span<const std::size_t> edges,
                 const DensitySpeedMap& map, const RoutingParams& params) {
  double c = 0.0;
  for (std::size_t e : edges) c += edge_cost(graph, e, map, params);
  return c;
}

namespace {

struct Label {
  double cost = std::numeric_limits<double>::infinity();
  std::vector<int> ids;            // node ids from origin
  std::vector<std::size_t> edges;  // edge path
  bool set = false;
};

bool better(double c1, const std::vector<int>& p1, double c2, const std::vector<int>& p2) {
  const double eps = 1e-9 * std::max(1.0, std::max(std::abs(c1), std::abs(c2)));
  if (c1 < c2 - eps) return true;
  if (c1 > c2 + eps) return false;
  return p1 < p2;
}

std::optional<std::vector<std::size_t>> dijkstra(const RoadGraph& g, std::size_t origin,
                                                 std::size_t destination,
                                                 const DensitySpeedMap& map,
                                                 const RoutingParams& params,
                                                 std::optional<std::size_t> avoid) {
  const std::size_t n = g.nodes().size();
  std::vector<Label> lab(n);
  std::vector<char> done(n, 0);
  lab[origin].cost = 0.0;
  lab[origin].ids = {g.nodes()[origin].id};
  lab[origin].set = true;
  for (;;) {
    std::optional<std::size_t> u;
    for (std::size_t i = 0; i < n; ++i) {
      if (done[i] || !lab[i].set) continue;
      if (!u || better(lab[i].cost, lab[i].ids, lab[*u].cost, lab[*u].ids)) u = i;
    }
    if (!u) break;
    done[*u] = 1;
    if (*u == destination) return lab[*u].edges;
    for (std::size_t e : g.out_edges(*u)) {
      const std::size_t v = g.edges()[e].to;
      if (done[v]) continue;
      if (*u == origin && avoid && v == *avoid) continue;
      const double c = lab[*u].cost + edge_cost(g, e, map, params);
      std::vector<int> ids = lab[*u].ids;
      ids.push_back(g.nodes()[v].id);
      if (!lab[v].set || better(c, ids, lab[v].cost, lab[v].ids)) {
        lab[v].cost = c;
        lab[v].ids = std::move(ids);
        lab[v].edges = lab[*u].edges;
        lab[v].edges.push_back(e);
        lab[v].set = true;
      }
    }
  }
  return std::nullopt;
}

}  // namespace

std::vector<std::size_t> plan_route(const RoadGraph& graph, std::size_t origin,
                                    std::size_t destination, const DensitySpeedMap& map,
                                    const RoutingParams& params,
                                    std::optional<std::size_t> avoid_first_hop) {
  if (origin >= graph.nodes().size() || destination >= graph.nodes().size()) {
    throw std::invalid_argument("route endpoints must be graph nodes");
  }
  if (origin == destination) return {};
  if (auto p = dijkstra(graph, origin, destination, map, params, avoid_first_hop)) return *p;
  if (avoid_first_hop) {
    if (auto p = dijkstra(graph, origin, destination, map, params, std::nullopt)) return *p;
  }
  throw Unreachable("no path from node " + std::to_string(graph.nodes()[origin].id) + " to node " +
                    std::to_string(graph.nodes()[destination].id));
}

FlowCounter::FlowCounter(std::vector<IntersectionZone> zones)
    : zones_(std::move(zones)), counts_(zones_.size(), 0) {}

void FlowCounter::observe(int vehicle_id, const Vec2& position) {
  auto it = inside_.find(vehicle_id);
  const bool first = it == inside_.end();
  if (first) it = inside_.emplace(vehicle_id, std::vector<char>(zones_.size(), 0)).first;
  for (std::size_t z = 0; z < zones_.size(); ++z) {
    const bool in = (position - zones_[z].center).norm() <= zones_[z].radius;
    if (in && !it->second[z] && !first) ++counts_[z];
    it->second[z] = in ? 1 : 0;
  }
}

std::int64_t FlowCounter::total() const {
  std::int64_t n = 0;
  for (auto c : counts_) n += c;
  return n;
}

std::int64_t FlowCounter::peak() const {
  return counts_.empty() ? 0 : *std::max_element(counts_.begin(), counts_.end());
}

FlowCounter count_flows(FlowCounter counter, const std::map<int, std::vector<Vec2>>& trajectories) {
  for (const auto& [id, traj] : trajectories) {
    for (const auto& p : traj) counter.observe(id, p);
  }
  return counter;
}

const char* to_string(RoutingMode m) { return m == RoutingMode::kRandom ? "random" : "scheduled"; }

RoutingMode routing_mode_from_string(const std::string& s) {
  if (s == "random") return RoutingMode::kRandom;
  if (s == "scheduled") return RoutingMode::kScheduled;
  throw std::invalid_argument("unknown routing mode '" + s + "'");
}

namespace {

double max_speed_limit(const ScenarioConfig& cfg) {
  double v = 0.0;
  for (const auto& e : cfg.graph.edges()) v = std::max(v, e.speed_limit);
  return v > 0.0 ? v : RoutingParams{}.free_speed;
}

}  // namespace

TripController::TripController(const ScenarioConfig& cfg, RoutingMode mode, std::uint64_t seed)
    : cfg_(&cfg),
      mode_(mode),
      params_{cfg.scheduling.congestion_lambda, cfg.scheduling.speed_floor, max_speed_limit(cfg)},
      empty_(DensitySpeedMap::empty(cfg.graph)),
      map_(empty_) {
  for (const auto& v : cfg.vehicles) {
    rngs_.emplace(v.id, make_substream(seed, "trip/" + std::to_string(v.id)));
    last_replan_[v.id] = 0.0;
  }
}

RouteProvider TripController::provider() {
  return [this](const VehicleRuntime& v, int at_node) { return continue_route(v, at_node); };
}

void TripController::set_map(DensitySpeedMap map) {
  records_consumed_ += map.total_count();
  map_ = std::move(map);
}

const DensitySpeedMap& TripController::active_map() const {
  return mode_ == RoutingMode::kScheduled ? map_ : empty_;
}

std::size_t TripController::draw_destination(int vehicle_id, std::size_t at) {
  const std::size_t n = cfg_->graph.nodes().size();
  std::uniform_int_distribution<std::size_t> pick(0, n - 2);
  std::size_t d = pick(rngs_.at(vehicle_id));
  if (d >= at) ++d;
  return d;
}

std::vector<int> TripController::node_path(std::size_t from,
                                           const std::vector<std::size_t>& edges) const {
  const RoadGraph& g = cfg_->graph;
  std::vector<int> ids{g.nodes()[from].id};
  for (std::size_t e : edges) ids.push_back(g.nodes()[g.edges()[e].to].id);
  return ids;
}

std::optional<std::vector<int>> TripController::continue_route(const VehicleRuntime& v,
                                                               int at_node) {
  const RoadGraph& g = cfg_->graph;
  const std::size_t at = *g.node_index(at_node);
  const std::size_t prev = g.edges()[v.edge()].from;
  auto dest = destination_.find(v.id);
  if (dest == destination_.end() || dest->second == at) {
    destination_[v.id] = draw_destination(v.id, at);
  }
  const auto edges = plan_route(g, at, destination_[v.id], active_map(), params_, prev);
  return node_path(at, edges);
}

void TripController::replan(WorldState& world) {
  if (mode_ != RoutingMode::kScheduled) return;
  const RoadGraph& g = cfg_->graph;
  for (const auto& v : world.vehicles) {
    double& last = last_replan_[v.id];
    if (world.t - last < cfg_->scheduling.replan_period - 1e-9) continue;
    last = world.t;
    const auto dest = destination_.find(v.id);
    if (dest == destination_.end() || v.exhausted) continue;
    const std::size_t at = g.edges()[v.edge()].to;
    if (at == dest->second) continue;
    const auto edges =
        plan_route(g, at, dest->second, map_, params_, g.edges()[v.edge()].from);
    const std::vector<std::size_t> current(v.route.begin() + static_cast<std::ptrdiff_t>(v.leg) + 1,
                                           v.route.end());
    if (edges == current) continue;
    if (reroute(*cfg_, world, v.id, node_path(at, edges))) ++reroutes_;
  }
}

}  // namespace roadfuse
