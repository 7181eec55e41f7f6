#include "roadfuse/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

namespace roadfuse {

using nlohmann::json;

const char* to_string(SensorKind kind) {
  switch (kind) {
    case SensorKind::kCamera:
      return "camera";
    case SensorKind::kRadar:
      return "radar";
    case SensorKind::kLidar:
      return "lidar";
  }
  return "camera";
}

SensorKind sensor_kind_from_string(const std::string& s) {
  if (s == "camera") return SensorKind::kCamera;
  if (s == "radar") return SensorKind::kRadar;
  if (s == "lidar") return SensorKind::kLidar;
  throw std::invalid_argument("unknown sensor kind '" + s + "'");
}

RoadGraph::RoadGraph(std::vector<RoadNode> nodes, std::vector<RoadEdge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)), out_(nodes_.size()) {
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    auto& edge = edges_[e];
    if (edge.from >= nodes_.size() || edge.to >= nodes_.size()) {
      throw std::invalid_argument("edge endpoint out of range");
    }
    edge.length = (nodes_[edge.to].position - nodes_[edge.from].position).norm();
    out_[edge.from].push_back(e);
  }
}

std::optional<std::size_t> RoadGraph::node_index(int id) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].id == id) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> RoadGraph::find_edge(std::size_t from, std::size_t to) const {
  if (from >= out_.size()) return std::nullopt;
  for (std::size_t e : out_[from]) {
    if (edges_[e].to == to) return e;
  }
  return std::nullopt;
}

std::size_t RoadGraph::degree(std::size_t node) const {
  std::set<std::size_t> nbrs;
  for (const auto& e : edges_) {
    if (e.from == node) nbrs.insert(e.to);
    if (e.to == node) nbrs.insert(e.from);
  }
  return nbrs.size();
}

std::optional<std::vector<std::size_t>> RoadGraph::edges_of_path(
    const std::vector<int>& node_ids) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i + 1 < node_ids.size(); ++i) {
    const auto a = node_index(node_ids[i]);
    const auto b = node_index(node_ids[i + 1]);
    if (!a || !b) return std::nullopt;
    const auto e = find_edge(*a, *b);
    if (!e) return std::nullopt;
    out.push_back(*e);
  }
  return out;
}

void NoiseProfile::validate() const {
  const auto sigma = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string("noise.") + name + " must be >= 0");
    }
  };
  const auto rate = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument(std::string("noise.") + name + " must be in [0, 1]");
    }
  };
  sigma(camera.pixel_sigma, "camera.pixel_sigma");
  rate(camera.miss_rate, "camera.miss_rate");
  rate(camera.false_positive_rate, "camera.false_positive_rate");
  sigma(radar.range_sigma, "radar.range_sigma");
  sigma(radar.azimuth_sigma, "radar.azimuth_sigma");
  sigma(radar.velocity_sigma, "radar.velocity_sigma");
  sigma(radar.position_variance, "radar.position_variance");
  sigma(lidar.center_sigma, "lidar.center_sigma");
  sigma(lidar.yaw_sigma, "lidar.yaw_sigma");
  sigma(lidar.dimension_sigma, "lidar.dimension_sigma");
  rate(lidar.miss_rate, "lidar.miss_rate");
}

const SensorRig* ScenarioConfig::rig(const std::string& id) const {
  for (const auto& r : rigs) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

double ScenarioConfig::slowest_rate() const {
  double slowest = 0.0;
  for (const auto& r : rigs) {
    if (slowest == 0.0 || r.rate < slowest) slowest = r.rate;
  }
  return slowest;
}

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string index_path(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(join(path, key), "missing required field");
  return *it;
}

const json* optional_field(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(path, "expected a finite number");
  return d;
}

double number(const json& obj, const std::string& key, const std::string& path) {
  return as_number(require(obj, key, path), join(path, key));
}

double number_or(const json& obj, const std::string& key, const std::string& path, double def) {
  const json* v = optional_field(obj, key, path);
  return v ? as_number(*v, join(path, key)) : def;
}

int as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
  return v.get<int>();
}

std::string string_field(const json& obj, const std::string& key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_string()) throw ConfigError(join(path, key), "expected a string");
  return v.get<std::string>();
}

bool bool_or(const json& obj, const std::string& key, const std::string& path, bool def) {
  const json* v = optional_field(obj, key, path);
  if (!v) return def;
  if (!v->is_boolean()) throw ConfigError(join(path, key), "expected true or false");
  return v->get<bool>();
}

const json& array_field(const json& obj, const std::string& key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_array()) throw ConfigError(join(path, key), "expected an array");
  return v;
}

std::vector<double> numbers(const json& v, const std::string& path, std::size_t n) {
  if (!v.is_array() || v.size() != n) {
    throw ConfigError(path, "expected an array of " + std::to_string(n) + " numbers");
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(as_number(v[i], index_path(path, i)));
  return out;
}

Vec3 vec3(const json& obj, const std::string& key, const std::string& path) {
  const auto v = numbers(require(obj, key, path), join(path, key), 3);
  return {v[0], v[1], v[2]};
}

void check(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ConfigError(path, what);
}

double default_rate(SensorKind kind) {
  switch (kind) {
    case SensorKind::kCamera:
      return 180.0;
    case SensorKind::kLidar:
      return 50.0;
    case SensorKind::kRadar:
      return 200.0;
  }
  return 1.0;
}

RoadGraph parse_graph(const json& g, const std::string& path) {
  std::vector<RoadNode> nodes;
  const json& jn = array_field(g, "nodes", path);
  for (std::size_t i = 0; i < jn.size(); ++i) {
    const std::string p = index_path(join(path, "nodes"), i);
    RoadNode n;
    n.id = as_int(require(jn[i], "id", p), join(p, "id"));
    n.position = {number(jn[i], "x", p), number(jn[i], "y", p)};
    for (const auto& other : nodes) {
      check(other.id != n.id, join(p, "id"), "duplicate node id " + std::to_string(n.id));
    }
    nodes.push_back(n);
  }
  const auto index_of = [&](int id, const std::string& p) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].id == id) return i;
    }
    throw ConfigError(p, "unknown node id " + std::to_string(id));
  };
  std::vector<RoadEdge> edges;
  const auto add_edge = [&](std::size_t a, std::size_t b, double limit, const std::string& p) {
    for (const auto& e : edges) {
      check(!(e.from == a && e.to == b), p, "duplicate edge");
    }
    check(a != b, p, "self loop");
    edges.push_back({a, b, limit, 0.0});
  };
  const json& je = array_field(g, "edges", path);
  for (std::size_t i = 0; i < je.size(); ++i) {
    const std::string p = index_path(join(path, "edges"), i);
    const std::size_t a = index_of(as_int(require(je[i], "from", p), join(p, "from")), join(p, "from"));
    const std::size_t b = index_of(as_int(require(je[i], "to", p), join(p, "to")), join(p, "to"));
    const double limit = number_or(je[i], "speed_limit", p, 0.5);
    check(limit > 0.0, join(p, "speed_limit"), "must be > 0");
    add_edge(a, b, limit, p);
    if (bool_or(je[i], "two_way", p, true)) add_edge(b, a, limit, p);
  }
  return RoadGraph(std::move(nodes), std::move(edges));
}

SensorRig parse_rig(const json& j, const std::string& p) {
  SensorRig rig;
  rig.id = string_field(j, "id", p);
  rig.agent_id = string_field(j, "agent", p);
  try {
    rig.kind = sensor_kind_from_string(string_field(j, "kind", p));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(join(p, "kind"), e.what());
  }
  rig.rate = number_or(j, "rate", p, default_rate(rig.kind));
  check(rig.rate > 0.0, join(p, "rate"), "must be > 0");
  if (const json* h = optional_field(j, "halt_at", p)) rig.halt_at = as_number(*h, join(p, "halt_at"));
  const Vec3 position = vec3(j, "position", p);
  const double yaw = number_or(j, "yaw_deg", p, 0.0) * kDeg;
  rig.pose = Pose3::from_yaw(yaw, position);

  switch (rig.kind) {
    case SensorKind::kCamera: {
      const int w = as_int(require(j, "width", p), join(p, "width"));
      const int h = as_int(require(j, "height", p), join(p, "height"));
      const double fx = number(j, "fx", p);
      const double fy = number_or(j, "fy", p, fx);
      const double cx = number_or(j, "cx", p, 0.5 * w);
      const double cy = number_or(j, "cy", p, 0.5 * h);
      const double pitch = number_or(j, "pitch_deg", p, 0.0) * kDeg;
      try {
        auto cam = CameraModel::mounted(fx, fy, cx, cy, w, h, position, yaw, pitch);
        if (const json* ps = optional_field(j, "pixel_scale", p)) {
          const auto v = numbers(*ps, join(p, "pixel_scale"), 9);
          Mat3 m;
          m << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
          cam = CameraModel(cam.intrinsics(), cam.extrinsics(), w, h, m);
        }
        rig.camera = cam;
        rig.pose = cam.extrinsics().inverse();
      } catch (const GeometryError& e) {
        throw ConfigError(p, e.what());
      }
      break;
    }
    case SensorKind::kRadar:
      rig.radar.fov_half_angle = number_or(j, "fov_half_angle_deg", p, 30.0) * kDeg;
      rig.radar.max_range = number_or(j, "max_range", p, 10.0);
      rig.radar.paired_camera = string_field(j, "paired_camera", p);
      check(rig.radar.fov_half_angle > 0.0 && rig.radar.fov_half_angle < std::numbers::pi,
            join(p, "fov_half_angle_deg"), "must be in (0, 180)");
      check(rig.radar.max_range > 0.0, join(p, "max_range"), "must be > 0");
      break;
    case SensorKind::kLidar:
      rig.lidar.min_range = number_or(j, "min_range", p, rig.lidar.min_range);
      rig.lidar.max_range = number_or(j, "max_range", p, rig.lidar.max_range);
      check(rig.lidar.min_range >= 0.0 && rig.lidar.max_range > rig.lidar.min_range,
            join(p, "max_range"), "lidar range bounds must satisfy 0 <= min < max");
      break;
  }
  return rig;
}

NoiseProfile parse_noise(const json& j, const std::string& p) {
  NoiseProfile n;
  if (const json* c = optional_field(j, "camera", p)) {
    const std::string q = join(p, "camera");
    n.camera.pixel_sigma = number_or(*c, "pixel_sigma", q, 0.0);
    n.camera.miss_rate = number_or(*c, "miss_rate", q, 0.0);
    n.camera.false_positive_rate = number_or(*c, "false_positive_rate", q, 0.0);
  }
  if (const json* r = optional_field(j, "radar", p)) {
    const std::string q = join(p, "radar");
    n.radar.range_sigma = number_or(*r, "range_sigma", q, 0.0);
    n.radar.azimuth_sigma = number_or(*r, "azimuth_sigma", q, 0.0);
    n.radar.velocity_sigma = number_or(*r, "velocity_sigma", q, 0.0);
    n.radar.position_variance = number_or(*r, "position_variance", q, 0.0);
  }
  if (const json* l = optional_field(j, "lidar", p)) {
    const std::string q = join(p, "lidar");
    n.lidar.center_sigma = number_or(*l, "center_sigma", q, 0.0);
    n.lidar.yaw_sigma = number_or(*l, "yaw_sigma", q, 0.0);
    n.lidar.dimension_sigma = number_or(*l, "dimension_sigma", q, 0.0);
    n.lidar.miss_rate = number_or(*l, "miss_rate", q, 0.0);
  }
  try {
    n.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(p, e.what());
  }
  return n;
}

void parse_fusion(const json& j, const std::string& p, ScenarioConfig& cfg) {
  FusionParams& f = cfg.fusion;
  if (const json* r = optional_field(j, "roi", p)) {
    const std::string q = join(p, "roi");
    f.roi.alpha = number_or(*r, "alpha", q, f.roi.alpha);
    f.roi.beta = number_or(*r, "beta", q, f.roi.beta);
    f.roi.base_width = number_or(*r, "base_width", q, f.roi.base_width);
    f.roi.base_height = number_or(*r, "base_height", q, f.roi.base_height);
  }
  // Observation noise of a potential is dominated by the radar range error.
  const double sigma2 = cfg.noise.radar.position_variance +
                        cfg.noise.radar.range_sigma * cfg.noise.radar.range_sigma;
  f.tracker.R = Mat2::Identity() * std::max(sigma2, 1e-4);
  if (const json* t = optional_field(j, "tracker", p)) {
    const std::string q = join(p, "tracker");
    f.tracker.gate_radius = number_or(*t, "gate_radius", q, f.tracker.gate_radius);
    f.tracker.Q = Mat2::Identity() * number_or(*t, "q", q, f.tracker.Q(0, 0));
    f.tracker.R = Mat2::Identity() * number_or(*t, "r", q, f.tracker.R(0, 0));
    if (const json* m = optional_field(*t, "max_missed", q)) {
      f.tracker.max_missed = as_int(*m, join(q, "max_missed"));
    }
    check(f.tracker.gate_radius > 0.0, join(q, "gate_radius"), "must be > 0");
    check(f.tracker.Q(0, 0) >= 0.0, join(q, "q"), "must be >= 0");
    check(f.tracker.R(0, 0) > 0.0, join(q, "r"), "must be > 0");
    check(f.tracker.max_missed >= 0, join(q, "max_missed"), "must be >= 0");
  }
  if (const json* m = optional_field(j, "merge", p)) {
    const std::string q = join(p, "merge");
    f.merge.lidar_weight = number_or(*m, "lidar_weight", q, f.merge.lidar_weight);
    f.merge.yaw_step = number_or(*m, "yaw_step_deg", q, f.merge.yaw_step / kDeg) * kDeg;
    f.merge.yaw_range = number_or(*m, "yaw_range_deg", q, f.merge.yaw_range / kDeg) * kDeg;
    f.merge.aspect_tolerance = number_or(*m, "aspect_tolerance", q, f.merge.aspect_tolerance);
    f.merge.keep_unmatched_3d = bool_or(*m, "keep_unmatched_3d", q, false);
    check(f.merge.lidar_weight >= 0.0 && f.merge.lidar_weight <= 1.0, join(q, "lidar_weight"),
          "must be in [0, 1]");
    check(f.merge.yaw_step > 0.0 && f.merge.yaw_range >= 0.0, join(q, "yaw_step_deg"),
          "yaw step must be > 0 and range >= 0");
  }
  f.radar_camera_gate = number_or(j, "radar_camera_gate", p, f.radar_camera_gate);
  f.lidar_camera_gate = number_or(j, "lidar_camera_gate", p, f.lidar_camera_gate);
  cfg.enable_radar_camera = bool_or(j, "enable_radar_camera", p, true);
  cfg.enable_lidar_camera = bool_or(j, "enable_lidar_camera", p, true);
}

std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(
                 std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& text, const std::string& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ":" + std::to_string(line_of(text, e.byte)), "syntax error");
  }
  ScenarioConfig cfg;
  const std::string p;
  check(root.is_object(), source, "top level must be an object");
  const int version = as_int(require(root, "version", p), "version");
  check(version == 1, "version", "unsupported scenario version " + std::to_string(version));

  const json& field = require(root, "field", p);
  cfg.field_width = number(field, "width", "field");
  cfg.field_length = number(field, "length", "field");
  check(cfg.field_width > 0.0 && cfg.field_length > 0.0, "field", "size must be positive");
  cfg.duration = number_or(root, "duration", p, cfg.duration);
  cfg.tick = number_or(root, "tick", p, cfg.tick);
  check(cfg.tick > 0.0, "tick", "must be > 0");
  check(cfg.duration > 0.0, "duration", "must be > 0");
  if (const json* s = optional_field(root, "seed", p)) {
    check(s->is_number_unsigned(), "seed", "expected a non-negative integer");
    cfg.seed = s->get<std::uint64_t>();
  }

  cfg.graph = parse_graph(require(root, "road_graph", p), "road_graph");

  const json& jv = array_field(root, "vehicles", p);
  for (std::size_t i = 0; i < jv.size(); ++i) {
    const std::string q = index_path("vehicles", i);
    VehicleSpec v;
    v.id = as_int(require(jv[i], "id", q), join(q, "id"));
    const auto d = numbers(require(jv[i], "dims", q), join(q, "dims"), 3);
    check(d[0] > 0.0 && d[1] > 0.0 && d[2] > 0.0, join(q, "dims"), "must be positive");
    v.dims = {d[0], d[1], d[2]};
    const json& route = array_field(jv[i], "route", q);
    for (std::size_t k = 0; k < route.size(); ++k) {
      v.route.push_back(as_int(route[k], index_path(join(q, "route"), k)));
    }
    v.speed = number_or(jv[i], "speed", q, v.speed);
    check(v.speed > 0.0, join(q, "speed"), "must be > 0");
    v.start_offset = number_or(jv[i], "start_offset", q, 0.0);
    cfg.vehicles.push_back(std::move(v));
  }

  if (const json* ja = optional_field(root, "agents", p)) {
    check(ja->is_array(), "agents", "expected an array");
    for (std::size_t i = 0; i < ja->size(); ++i) {
      const std::string q = index_path("agents", i);
      AgentRegionSpec a;
      a.id = string_field((*ja)[i], "id", q);
      const json& poly = array_field((*ja)[i], "polygon", q);
      for (std::size_t k = 0; k < poly.size(); ++k) {
        const auto xy = numbers(poly[k], index_path(join(q, "polygon"), k), 2);
        a.polygon.emplace_back(xy[0], xy[1]);
      }
      check(a.polygon.size() >= 3, join(q, "polygon"), "needs at least 3 vertices");
      cfg.agents.push_back(std::move(a));
    }
  }

  const json& jr = array_field(root, "sensor_rigs", p);
  for (std::size_t i = 0; i < jr.size(); ++i) {
    cfg.rigs.push_back(parse_rig(jr[i], index_path("sensor_rigs", i)));
  }

  if (const json* jn = optional_field(root, "noise", p)) cfg.noise = parse_noise(*jn, "noise");

  if (const json* ji = optional_field(root, "intersections", p)) {
    check(ji->is_array(), "intersections", "expected an array");
    for (std::size_t i = 0; i < ji->size(); ++i) {
      const std::string q = index_path("intersections", i);
      IntersectionZone z;
      z.number = as_int(require((*ji)[i], "number", q), join(q, "number"));
      z.node_id = as_int(require((*ji)[i], "node", q), join(q, "node"));
      z.radius = number_or((*ji)[i], "radius", q, z.radius);
      check(z.radius > 0.0, join(q, "radius"), "must be > 0");
      const auto idx = cfg.graph.node_index(z.node_id);
      check(idx.has_value(), join(q, "node"), "unknown node id " + std::to_string(z.node_id));
      z.center = cfg.graph.nodes()[*idx].position;
      cfg.intersections.push_back(z);
    }
  }

  if (const json* jt = optional_field(root, "traffic", p)) {
    TrafficParams& t = cfg.traffic;
    t.lane_offset = number_or(*jt, "lane_offset", "traffic", t.lane_offset);
    t.min_gap = number_or(*jt, "min_gap", "traffic", t.min_gap);
    t.headway = number_or(*jt, "headway", "traffic", t.headway);
    t.lock_radius = number_or(*jt, "lock_radius", "traffic", t.lock_radius);
    check(t.min_gap > 0.0, "traffic.min_gap", "must be > 0");
    check(t.headway > t.min_gap, "traffic.headway", "must exceed min_gap");
    check(t.lane_offset >= 0.0, "traffic.lane_offset", "must be >= 0");
    check(t.lock_radius >= 0.0, "traffic.lock_radius", "must be >= 0");
  }

  parse_fusion(optional_field(root, "fusion", p) ? root["fusion"] : json::object(), "fusion", cfg);

  if (const json* js = optional_field(root, "scheduling", p)) {
    SchedulingParams& s = cfg.scheduling;
    s.congestion_lambda = number_or(*js, "congestion_lambda", "scheduling", s.congestion_lambda);
    s.speed_floor = number_or(*js, "speed_floor", "scheduling", s.speed_floor);
    s.replan_period = number_or(*js, "replan_period", "scheduling", s.replan_period);
    s.density_window = number_or(*js, "density_window", "scheduling", s.density_window);
    s.snap_distance = number_or(*js, "snap_distance", "scheduling", s.snap_distance);
    check(s.congestion_lambda >= 0.0, "scheduling.congestion_lambda", "must be >= 0");
    check(s.speed_floor > 0.0, "scheduling.speed_floor", "must be > 0");
    check(s.replan_period > 0.0, "scheduling.replan_period", "must be > 0");
    check(s.density_window > 0.0, "scheduling.density_window", "must be > 0");
    check(s.snap_distance > 0.0, "scheduling.snap_distance", "must be > 0");
  }

  validate_scenario(cfg);
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open scenario file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path.string());
}

void validate_scenario(const ScenarioConfig& cfg) {
  check(cfg.field_width > 0.0 && cfg.field_length > 0.0, "field", "size must be positive");
  check(cfg.tick > 0.0, "tick", "must be > 0");
  for (std::size_t i = 0; i < cfg.graph.nodes().size(); ++i) {
    const Vec2& q = cfg.graph.nodes()[i].position;
    check(q.x() >= 0.0 && q.x() <= cfg.field_width && q.y() >= 0.0 && q.y() <= cfg.field_length,
          index_path("road_graph.nodes", i), "node lies outside the field");
  }

  std::set<int> vehicle_ids;
  for (std::size_t i = 0; i < cfg.vehicles.size(); ++i) {
    const auto& v = cfg.vehicles[i];
    const std::string q = index_path("vehicles", i);
    check(vehicle_ids.insert(v.id).second, join(q, "id"), "duplicate vehicle id");
    check(v.route.size() >= 2, join(q, "route"), "needs at least two nodes");
    const auto edges = cfg.graph.edges_of_path(v.route);
    check(edges.has_value(), join(q, "route"), "not a connected path in the road graph");
    const double first_len = cfg.graph.edges()[edges->front()].length;
    check(v.start_offset >= 0.0 && v.start_offset < first_len, join(q, "start_offset"),
          "must lie on the first route edge");
  }
  // Vehicles sharing a first edge must not start overlapping.
  for (std::size_t i = 0; i < cfg.vehicles.size(); ++i) {
    for (std::size_t k = i + 1; k < cfg.vehicles.size(); ++k) {
      const auto& a = cfg.vehicles[i];
      const auto& b = cfg.vehicles[k];
      if (a.route[0] != b.route[0] || a.route[1] != b.route[1]) continue;
      const double need = 0.5 * (a.dims.length + b.dims.length) + cfg.traffic.min_gap;
      check(std::abs(a.start_offset - b.start_offset) >= need,
            join(index_path("vehicles", k), "start_offset"),
            "overlaps vehicle " + std::to_string(a.id) + " at start");
    }
  }

  std::set<std::string> rig_ids;
  for (std::size_t i = 0; i < cfg.rigs.size(); ++i) {
    const auto& r = cfg.rigs[i];
    const std::string q = index_path("sensor_rigs", i);
    check(rig_ids.insert(r.id).second, join(q, "id"), "duplicate rig id");
    if (!cfg.agents.empty()) {
      const bool known = std::any_of(cfg.agents.begin(), cfg.agents.end(),
                                     [&](const AgentRegionSpec& a) { return a.id == r.agent_id; });
      check(known, join(q, "agent"), "unknown agent '" + r.agent_id + "'");
    }
    if (r.kind == SensorKind::kRadar) {
      const SensorRig* cam = cfg.rig(r.radar.paired_camera);
      check(cam && cam->kind == SensorKind::kCamera, join(q, "paired_camera"),
            "must name a camera rig");
      check(cam->agent_id == r.agent_id, join(q, "paired_camera"),
            "paired camera belongs to another agent");
      try {
        cfg.fusion.roi.validate(r.radar.max_range);
      } catch (const std::invalid_argument& e) {
        throw ConfigError("fusion.roi", e.what());
      }
    }
  }
  check(cfg.enable_radar_camera || cfg.enable_lidar_camera, "fusion",
        "at least one fusion branch must be enabled");
}

}  // namespace roadfuse
