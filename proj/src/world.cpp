#include "roadfuse/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <tuple>

namespace roadfuse {

Box3D vehicle_box(const VehicleState& v) {
  return Box3D({v.position.x(), v.position.y(), 0.5 * v.dims.height}, v.dims, v.yaw);
}

int node_id_at_edge_end(const ScenarioConfig& cfg, std::size_t edge) {
  return cfg.graph.nodes()[cfg.graph.edges()[edge].to].id;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vec2 direction(const RoadGraph& g, std::size_t e) {
  return (g.edge_end(e) - g.edge_start(e)).normalized();
}

Vec2 right_normal(const Vec2& d) { return {d.y(), -d.x()}; }

/// Lane point at the joint between consecutive edges: offset lines meet on the
/// miter. Near-reversals fall back to the plain offset of `own`.
Vec2 joint(const RoadGraph& g, std::size_t node, const std::size_t* in, const std::size_t* out,
           std::size_t own, double offset) {
  const Vec2 p = g.nodes()[node].position;
  if (!in || !out) {
    return p + offset * right_normal(direction(g, own));
  }
  const Vec2 n1 = right_normal(direction(g, *in));
  const Vec2 n2 = right_normal(direction(g, *out));
  const double c = 1.0 + n1.dot(n2);
  if (c < 0.2) {
    return p + offset * right_normal(direction(g, own));
  }
  return p + offset * (n1 + n2) / c;
}

std::vector<std::size_t> original_route(const ScenarioConfig& cfg, int id) {
  for (const auto& v : cfg.vehicles) {
    if (v.id == id) return *cfg.graph.edges_of_path(v.route);
  }
  throw std::logic_error("unknown vehicle id");
}

void append_path(const ScenarioConfig& cfg, VehicleRuntime& v, const std::vector<int>& path) {
  const int at = node_id_at_edge_end(cfg, v.edge());
  if (path.size() < 2 || path.front() != at) {
    throw std::logic_error("route continuation must start at the current edge's end node");
  }
  const auto edges = cfg.graph.edges_of_path(path);
  if (!edges) {
    throw std::logic_error("route continuation is not connected in the road graph");
  }
  v.route.resize(v.leg + 1);
  v.route.insert(v.route.end(), edges->begin(), edges->end());
  v.exhausted = false;
}

bool holds_any_lock(const WorldState& w, int id) {
  return std::any_of(w.lock_holder.begin(), w.lock_holder.end(),
                     [&](const std::optional<int>& h) { return h && *h == id; });
}

/// Rear clearance at the start of `edge`: how far from the edge start the
/// rearmost body on it begins (kInf when empty).
double rear_clearance(const WorldState& w, std::size_t edge) {
  double best = kInf;
  for (const auto& o : w.vehicles) {
    if (o.edge() == edge) best = std::min(best, o.s - 0.5 * o.dims.length);
  }
  return best;
}

}  // namespace

std::pair<Vec2, double> lane_pose(const ScenarioConfig& cfg, const VehicleRuntime& v,
                                  std::size_t leg, double s) {
  const RoadGraph& g = cfg.graph;
  const std::size_t e = v.route[leg];
  const std::size_t* prev = leg > 0 ? &v.route[leg - 1] : nullptr;
  const std::size_t* next = leg + 1 < v.route.size() ? &v.route[leg + 1] : nullptr;
  const double off = cfg.traffic.lane_offset;
  const Vec2 a = joint(g, g.edges()[e].from, prev, &e, e, off);
  const Vec2 b = joint(g, g.edges()[e].to, &e, next, e, off);
  const double len = g.edges()[e].length;
  const double f = len > 0.0 ? std::clamp(s / len, 0.0, 1.0) : 0.0;
  const Vec2 d = b - a;
  return {a + f * d, std::atan2(d.y(), d.x())};
}

WorldState initial_world(const ScenarioConfig& cfg) {
  WorldState w;
  for (const auto& spec : cfg.vehicles) {
    VehicleRuntime v;
    v.id = spec.id;
    v.dims = spec.dims;
    v.nominal_speed = spec.speed;
    v.route = *cfg.graph.edges_of_path(spec.route);
    v.origin_edge = v.route.front();
    v.s = spec.start_offset;
    w.vehicles.push_back(std::move(v));
  }
  std::sort(w.vehicles.begin(), w.vehicles.end(),
            [](const VehicleRuntime& a, const VehicleRuntime& b) { return a.id < b.id; });
  const std::size_t n = cfg.graph.nodes().size();
  w.lock_holder.assign(n, std::nullopt);
  w.lock_node.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    w.lock_node[i] = cfg.graph.degree(i) >= 3 ? 1 : 0;
  }
  return w;
}

StepEvents advance_world(const ScenarioConfig& cfg, WorldState& w, double dt,
                         const RouteProvider& provider) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("dt must be > 0");
  }
  const RoadGraph& g = cfg.graph;
  const TrafficParams& tp = cfg.traffic;
  StepEvents events;

  // Continuations for vehicles that sit on their last edge.
  for (auto& v : w.vehicles) {
    if (!v.on_last_leg() || v.exhausted) continue;
    std::optional<std::vector<int>> more;
    if (provider) more = provider(v, node_id_at_edge_end(cfg, v.edge()));
    if (more) {
      append_path(cfg, v, *more);
    } else {
      v.exhausted = true;
    }
  }

  // Release reservations once the holder's rear is clear of the junction.
  for (std::size_t n = 0; n < w.lock_holder.size(); ++n) {
    if (!w.lock_holder[n]) continue;
    const auto it = std::find_if(w.vehicles.begin(), w.vehicles.end(),
                                 [&](const VehicleRuntime& v) { return v.id == *w.lock_holder[n]; });
    bool release = true;
    if (it != w.vehicles.end()) {
      const RoadEdge& e = g.edges()[it->edge()];
      if (e.to == n) {
        release = false;
      } else if (e.from == n) {
        release = it->s - 0.5 * it->dims.length >= tp.lock_radius;
      }
    }
    if (release) w.lock_holder[n].reset();
  }

  // Distance a vehicle may still drive before its front reaches the stop line.
  const auto stop_distance = [&](const VehicleRuntime& v) {
    const RoadEdge& e = g.edges()[v.edge()];
    return e.length - v.s - 0.5 * v.dims.length - tp.lock_radius;
  };
  const auto needs_lock = [&](const VehicleRuntime& v) {
    return w.lock_node[g.edges()[v.edge()].to] && !v.on_last_leg() &&
           !(w.lock_holder[g.edges()[v.edge()].to] == v.id);
  };

  // Requests and first-come grants.
  for (auto& v : w.vehicles) {
    if (needs_lock(v) && stop_distance(v) <= tp.headway) {
      if (!v.lock_request_t) v.lock_request_t = w.t;
    }
  }
  for (std::size_t n = 0; n < w.lock_holder.size(); ++n) {
    if (!w.lock_node[n] || w.lock_holder[n]) continue;
    VehicleRuntime* winner = nullptr;
    for (auto& v : w.vehicles) {
      if (!v.lock_request_t || g.edges()[v.edge()].to != n || !needs_lock(v)) continue;
      const double room = rear_clearance(w, v.route[v.leg + 1]);
      if (room < tp.lock_radius + v.dims.length + tp.min_gap) continue;
      if (!winner || std::tie(*v.lock_request_t, v.id) < std::tie(*winner->lock_request_t, winner->id)) {
        winner = &v;
      }
    }
    if (winner) {
      w.lock_holder[n] = winner->id;
      winner->lock_request_t.reset();
    }
  }

  // Free distance from the current (pre-step) positions.
  std::vector<double> moves(w.vehicles.size(), 0.0);
  for (std::size_t i = 0; i < w.vehicles.size(); ++i) {
    const VehicleRuntime& v = w.vehicles[i];
    const RoadEdge& e = g.edges()[v.edge()];
    double free = kInf;
    double ahead = 0.0;  // distance from v's position to the start of the scanned edge
    for (std::size_t k = v.leg; k < v.route.size() && k <= v.leg + 2; ++k) {
      const std::size_t edge = v.route[k];
      for (std::size_t j = 0; j < w.vehicles.size(); ++j) {
        const VehicleRuntime& o = w.vehicles[j];
        if (j == i || o.edge() != edge) continue;
        const double rel = k == v.leg ? o.s - v.s : ahead + o.s;
        if (k == v.leg && (rel < 0.0 || (rel == 0.0 && o.id > v.id))) continue;
        free = std::min(free, rel - 0.5 * (o.dims.length + v.dims.length) - tp.min_gap);
      }
      ahead += k == v.leg ? e.length - v.s : g.edges()[edge].length;
    }
    if (needs_lock(v)) {
      free = std::min(free, stop_distance(v));
    }
    const double desired = std::min(v.nominal_speed, e.speed_limit);
    const double scale = std::clamp(free / (tp.headway - tp.min_gap), 0.0, 1.0);
    // The route end is an exit, not a leader: drive up to it without slowing.
    const double cap = v.on_last_leg() && v.exhausted ? std::min(free, e.length - v.s) : free;
    moves[i] = std::clamp(desired * scale * dt, 0.0, std::max(cap, 0.0));
  }

  for (std::size_t i = 0; i < w.vehicles.size(); ++i) {
    VehicleRuntime& v = w.vehicles[i];
    v.s += moves[i];
    v.speed = moves[i] / dt;
    const double len = g.edges()[v.edge()].length;
    if (v.s < len) continue;
    if (!v.on_last_leg()) {
      v.s -= len;
      ++v.leg;
      if (v.leg >= 2) {
        v.route.erase(v.route.begin());
        --v.leg;
      }
      continue;
    }
    v.s = len;
    if (!v.exhausted) continue;
    // Respawn at the route start once there is room.
    const double room = rear_clearance(w, v.origin_edge);
    if (room < v.dims.length + tp.min_gap) continue;
    events.route_exhausted.push_back(v.id);
    events.respawned.push_back(v.id);
    v.route = original_route(cfg, v.id);
    v.leg = 0;
    v.s = 0.5 * v.dims.length;
    v.exhausted = false;
    v.lock_request_t.reset();
    v.speed = 0.0;
  }

  ++w.step;
  w.t = static_cast<double>(w.step) * dt;
  return events;
}

WorldState step_world(const ScenarioConfig& cfg, const WorldState& state, double dt,
                      const RouteProvider& provider, StepEvents* events) {
  WorldState next = state;
  auto ev = advance_world(cfg, next, dt, provider);
  if (events) *events = std::move(ev);
  return next;
}

std::vector<VehicleState> vehicle_states(const ScenarioConfig& cfg, const WorldState& state) {
  std::vector<VehicleState> out;
  out.reserve(state.vehicles.size());
  for (const auto& v : state.vehicles) {
    const auto [p, yaw] = lane_pose(cfg, v, v.leg, v.s);
    VehicleState s;
    s.id = v.id;
    s.position = p;
    s.yaw = normalize_angle(yaw);
    s.speed = v.speed;
    s.velocity = v.speed * Vec2(std::cos(yaw), std::sin(yaw));
    s.dims = v.dims;
    s.t = state.t;
    out.push_back(s);
  }
  return out;
}

bool reroute(const ScenarioConfig& cfg, WorldState& state, int vehicle_id,
             const std::vector<int>& path) {
  const auto it = std::find_if(state.vehicles.begin(), state.vehicles.end(),
                               [&](const VehicleRuntime& v) { return v.id == vehicle_id; });
  if (it == state.vehicles.end()) {
    throw std::invalid_argument("unknown vehicle id " + std::to_string(vehicle_id));
  }
  if (it->lock_request_t || holds_any_lock(state, vehicle_id)) {
    return false;
  }
  append_path(cfg, *it, path);
  return true;
}

}  // namespace roadfuse
