#include <doctest.h>

#include <cmath>
#include <memory>
#include <string>

#include <json.hpp>

#include "oracles.hpp"
#include "roadfuse/emulators.hpp"
#include "roadfuse/scenario.hpp"
#include "roadfuse/sync.hpp"
#include "roadfuse/world.hpp"
#include "support.hpp"

using namespace roadfuse;
using nlohmann::json;

namespace {

/// Straight three-node road with one vehicle; sensors added by the caller.
json line_scenario() {
  return json{
      {"version", 1},
      {"field", {{"width", 10.0}, {"length", 4.0}}},
      {"road_graph",
       {{"nodes", {{{"id", 1}, {"x", 0.5}, {"y", 2.0}}, {{"id", 2}, {"x", 5.0}, {"y", 2.0}},
                   {{"id", 3}, {"x", 9.5}, {"y", 2.0}}}},
        {"edges", {{{"from", 1}, {"to", 2}, {"speed_limit", 2.0}},
                   {{"from", 2}, {"to", 3}, {"speed_limit", 2.0}}}}}},
      {"vehicles", {{{"id", 1}, {"dims", {0.3, 0.16, 0.12}}, {"route", {1, 2, 3}}, {"speed", 1.0},
                     {"start_offset", 0.5}}}},
      {"sensor_rigs", json::array()},
      {"traffic", {{"lane_offset", 0.0}}}};
}

ScenarioConfig parse(const json& j) { return parse_scenario(j.dump()); }

std::string config_error_where(const json& j) {
  try {
    parse(j);
  } catch (const ConfigError& e) {
    return e.where();
  }
  return "<no error>";
}

}  // namespace

TEST_SUITE("scenario") {

TEST_CASE("the default scenario loads and validates") {
  const ScenarioConfig cfg = load_scenario(testsupport::default_scenario());
  CHECK(cfg.graph.nodes().size() == 7);
  CHECK(cfg.vehicles.size() == 10);
  CHECK(cfg.agents.size() == 3);
  CHECK(cfg.intersections.size() == 7);
  CHECK(cfg.slowest_rate() == doctest::Approx(50.0));
  CHECK_NOTHROW(validate_scenario(cfg));
}

TEST_CASE("sensor rates default by kind") {
  json j = line_scenario();
  j["sensor_rigs"] = {{{"id", "c"}, {"agent", "a"}, {"kind", "camera"}, {"position", {1, 1, 1}},
                       {"width", 640}, {"height", 480}, {"fx", 500}},
                      {{"id", "l"}, {"agent", "a"}, {"kind", "lidar"}, {"position", {1, 1, 1}}},
                      {{"id", "r"}, {"agent", "a"}, {"kind", "radar"}, {"position", {1, 1, 0}},
                       {"paired_camera", "c"}}};
  const ScenarioConfig cfg = parse(j);
  CHECK(cfg.rig("c")->rate == 180.0);
  CHECK(cfg.rig("l")->rate == 50.0);
  CHECK(cfg.rig("r")->rate == 200.0);
  CHECK(cfg.rig("missing") == nullptr);
}

TEST_CASE("schema errors name the offending field") {
  json j = line_scenario();
  j["vehicles"][0].erase("dims");
  CHECK(config_error_where(j) == "vehicles[0].dims");

  j = line_scenario();
  j["vehicles"][0]["speed"] = "fast";
  CHECK(config_error_where(j) == "vehicles[0].speed");

  j = line_scenario();
  j["vehicles"][0]["route"] = {1, 3};
  CHECK(config_error_where(j) == "vehicles[0].route");

  j = line_scenario();
  j["road_graph"]["edges"][0]["to"] = 42;
  CHECK(config_error_where(j) == "road_graph.edges[0].to");

  j = line_scenario();
  j["road_graph"]["nodes"][2]["x"] = 20.0;
  CHECK(config_error_where(j) == "road_graph.nodes[2]");

  j = line_scenario();
  j["noise"] = {{"camera", {{"miss_rate", 1.5}}}};
  CHECK(config_error_where(j) == "noise");

  j = line_scenario();
  j["version"] = 2;
  CHECK(config_error_where(j) == "version");

  j = line_scenario();
  j["sensor_rigs"] = {{{"id", "r"}, {"agent", "a"}, {"kind", "radar"}, {"position", {1, 1, 0}},
                       {"paired_camera", "nope"}}};
  CHECK(config_error_where(j) == "sensor_rigs[0].paired_camera");
}

TEST_CASE("syntax errors name the line") {
  const std::string text = "{\n  \"version\": 1,\n  \"field\": {,\n}";
  try {
    parse_scenario(text, "broken.json");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.where() == "broken.json:3");
  }
}

TEST_CASE("graph queries") {
  const ScenarioConfig cfg = parse(line_scenario());
  const RoadGraph& g = cfg.graph;
  CHECK(g.edges().size() == 4);
  CHECK(g.degree(*g.node_index(2)) == 2);
  CHECK(g.edges()[0].length == doctest::Approx(4.5));
  CHECK(g.edges_of_path({1, 2, 3}).has_value());
  CHECK_FALSE(g.edges_of_path({1, 3}).has_value());
  CHECK_FALSE(g.node_index(9).has_value());
}

}  // TEST_SUITE

TEST_SUITE("world") {

TEST_CASE("a free vehicle at 1 m/s advances 0.1 m in 0.1 s") {
  const ScenarioConfig cfg = parse(line_scenario());
  WorldState w = initial_world(cfg);
  const auto before = vehicle_states(cfg, w)[0].position;
  advance_world(cfg, w, 0.1);
  const auto after = vehicle_states(cfg, w)[0];
  CHECK((after.position - before).norm() == doctest::Approx(0.1));
  CHECK(after.speed == doctest::Approx(1.0));
  CHECK(w.t == doctest::Approx(0.1));
}

TEST_CASE("speed is capped by the segment limit") {
  json j = line_scenario();
  j["road_graph"]["edges"][0]["speed_limit"] = 0.25;
  const ScenarioConfig cfg = parse(j);
  WorldState w = initial_world(cfg);
  advance_world(cfg, w, 0.1);
  CHECK(w.vehicles[0].speed == doctest::Approx(0.25));
}

TEST_CASE("a vehicle continues onto the next edge and respawns at the end") {
  const ScenarioConfig cfg = parse(line_scenario());
  WorldState w = initial_world(cfg);
  bool respawned = false;
  for (int i = 0; i < 200 && !respawned; ++i) {
    const auto ev = advance_world(cfg, w, 0.05);
    if (!ev.respawned.empty()) {
      respawned = true;
      CHECK(ev.route_exhausted == std::vector<int>{1});
    }
  }
  REQUIRE(respawned);
  CHECK(w.vehicles[0].leg == 0);
  CHECK(w.vehicles[0].s == doctest::Approx(0.15));
}

TEST_CASE("a follower never closes below the minimum gap") {
  json j = line_scenario();
  j["vehicles"].push_back({{"id", 2}, {"dims", {0.3, 0.16, 0.12}}, {"route", {1, 2, 3}},
                           {"speed", 0.2}, {"start_offset", 1.5}});
  const ScenarioConfig cfg = parse(j);
  WorldState w = initial_world(cfg);
  double min_gap = 1e9;
  for (int i = 0; i < 4000; ++i) {
    advance_world(cfg, w, 0.002);
    const auto& a = w.vehicles[0];
    const auto& b = w.vehicles[1];
    if (a.edge() == b.edge() && a.leg == 0 && b.leg == 0) {
      min_gap = std::min(min_gap, b.s - a.s - 0.3);
    }
  }
  CHECK(min_gap >= cfg.traffic.min_gap - 1e-12);
  CHECK(min_gap < cfg.traffic.headway);  // they did close up
}

TEST_CASE("default traffic keeps gaps and limits over a long run") {
  const ScenarioConfig cfg = load_scenario(testsupport::default_scenario());
  WorldState w = initial_world(cfg);
  for (int step = 0; step < 20000; ++step) {
    advance_world(cfg, w, cfg.tick);
    for (std::size_t a = 0; a < w.vehicles.size(); ++a) {
      const auto& va = w.vehicles[a];
      CHECK(va.speed <= cfg.graph.edges()[va.edge()].speed_limit + 1e-12);
      for (std::size_t b = a + 1; b < w.vehicles.size(); ++b) {
        const auto& vb = w.vehicles[b];
        if (va.edge() != vb.edge()) continue;
        const double need = 0.5 * (va.dims.length + vb.dims.length) + cfg.traffic.min_gap;
        CHECK(std::abs(va.s - vb.s) >= need - 1e-9);
      }
    }
  }
  // holders of one junction are unique by construction; each holder is near it
  for (std::size_t n = 0; n < w.lock_holder.size(); ++n) {
    if (w.lock_holder[n]) CHECK(w.lock_node[n]);
  }
}

TEST_CASE("step_world leaves the input untouched and matches advance_world") {
  const ScenarioConfig cfg = load_scenario(testsupport::default_scenario());
  const WorldState w0 = initial_world(cfg);
  WorldState w1 = w0;
  advance_world(cfg, w1, cfg.tick);
  const WorldState w2 = step_world(cfg, w0, cfg.tick);
  CHECK(w0.step == 0);
  for (std::size_t i = 0; i < w1.vehicles.size(); ++i) CHECK(w1.vehicles[i].s == w2.vehicles[i].s);
  CHECK_THROWS_AS(advance_world(cfg, w1, 0.0), std::invalid_argument);
}

TEST_CASE("reroute replaces the remaining route") {
  json j = line_scenario();
  j["road_graph"]["nodes"].push_back({{"id", 4}, {"x", 5.0}, {"y", 3.5}});
  j["road_graph"]["edges"].push_back({{"from", 2}, {"to", 4}});
  const ScenarioConfig cfg = parse(j);
  WorldState w = initial_world(cfg);
  CHECK(reroute(cfg, w, 1, {2, 4}));
  CHECK(node_id_at_edge_end(cfg, w.vehicles[0].route.back()) == 4);
  CHECK_THROWS_AS(reroute(cfg, w, 99, {2, 4}), std::invalid_argument);
  CHECK_THROWS_AS(reroute(cfg, w, 1, {3, 2}), std::logic_error);
}

}  // TEST_SUITE

TEST_SUITE("emulators") {

TEST_CASE("firing schedule hits the configured rate") {
  const double tick = 0.0005;
  for (double rate : {50.0, 180.0, 200.0}) {
    int n = 0;
    for (std::int64_t s = 0; s < 2000; ++s) n += fires_at(rate, tick, s);
    // steps 0..1999 span [0, 1) s, and step 0 always fires
    CHECK(n == static_cast<int>(rate));
  }
}

TEST_CASE("substreams are deterministic and independent by name") {
  Rng a = make_substream(42, "cam_a");
  Rng b = make_substream(42, "cam_a");
  Rng c = make_substream(42, "cam_b");
  Rng d = make_substream(43, "cam_a");
  const auto x = a();
  CHECK(x == b());
  CHECK(x != c());
  CHECK(x != d());
}

TEST_CASE("noise-free sensors reproduce ground truth") {
  const ScenarioConfig cfg = load_scenario(testsupport::default_scenario());
  WorldState w = initial_world(cfg);
  for (int i = 0; i < 3000; ++i) advance_world(cfg, w, cfg.tick);
  const auto vs = vehicle_states(cfg, w);
  const auto by_id = [&](int id) -> const VehicleState& {
    return *std::find_if(vs.begin(), vs.end(), [&](const VehicleState& v) { return v.id == id; });
  };
  Rng rng(1);
  int cam_hits = 0, lidar_hits = 0, radar_hits = 0;
  for (const auto& rig : cfg.rigs) {
    const StampedFrame f = sense(rig, vs, NoiseProfile{}, rng, 1.5);
    CHECK(f.sensor_id == rig.id);
    CHECK(f.t == 1.5);
    CHECK(f.kind() == rig.kind);
    if (rig.kind == SensorKind::kCamera) {
      for (const auto& d : std::get<std::vector<Detection2D>>(f.payload)) {
        REQUIRE(d.source_vehicle >= 0);
        const auto hull = oracle::corner_hull(vehicle_box(by_id(d.source_vehicle)), *rig.camera);
        CHECK(d.box.u_min() == doctest::Approx(hull->u_min()));
        CHECK(d.box.v_max() == doctest::Approx(hull->v_max()));
        ++cam_hits;
      }
    } else if (rig.kind == SensorKind::kLidar) {
      for (const auto& d : std::get<std::vector<Detection3D>>(f.payload)) {
        const Box3D t = vehicle_box(by_id(d.source_vehicle));
        CHECK((d.box.center() - t.center()).norm() < 1e-12);
        CHECK(d.box.yaw() == doctest::Approx(t.yaw()));
        ++lidar_hits;
      }
    } else {
      for (const auto& p : std::get<std::vector<RadarPoint>>(f.payload)) {
        const auto& v = by_id(p.source_vehicle);
        const Vec3 world = rig.pose.transform_point(radar_point_position(p));
        CHECK((world.head<2>() - v.position).norm() < 1e-9);
        CHECK(std::abs(p.azimuth) <= rig.radar.fov_half_angle);
        ++radar_hits;
      }
    }
  }
  CHECK(cam_hits > 0);
  CHECK(lidar_hits > 0);
  CHECK(radar_hits >= 0);
}

TEST_CASE("camera false positives carry no source and respect the image") {
  const ScenarioConfig cfg = load_scenario(testsupport::default_scenario());
  CameraNoise noise;
  noise.false_positive_rate = 1.0;
  Rng rng(3);
  const SensorRig& cam = *std::find_if(cfg.rigs.begin(), cfg.rigs.end(),
                                       [](const SensorRig& r) { return r.kind == SensorKind::kCamera; });
  for (int i = 0; i < 50; ++i) {
    const auto f = sense_camera(cam, {}, noise, rng, 0.0);
    const auto& dets = std::get<std::vector<Detection2D>>(f.payload);
    REQUIRE(dets.size() == 1);
    CHECK(dets[0].source_vehicle == -1);
    CHECK(dets[0].box.u_min() >= 0.0);
    CHECK(dets[0].box.u_max() <= cam.camera->width());
  }
}

TEST_CASE("sensor kind names round-trip") {
  for (auto k : {SensorKind::kCamera, SensorKind::kRadar, SensorKind::kLidar}) {
    CHECK(sensor_kind_from_string(to_string(k)) == k);
  }
  CHECK_THROWS_AS(sensor_kind_from_string("sonar"), std::invalid_argument);
}

}  // TEST_SUITE

TEST_SUITE("sync") {

namespace {

StampedFrame frame(const std::string& id, double t) { return {id, t, std::vector<Detection2D>{}}; }

std::vector<StampedFrame> stream(const std::string& id, double rate, double duration) {
  std::vector<StampedFrame> out;
  for (int k = 0; k * (1.0 / rate) <= duration; ++k) out.push_back(frame(id, k / rate));
  return out;
}

}  // namespace

TEST_CASE("180 Hz camera and 50 Hz lidar fill every slot at 10 ms tolerance") {
  const auto bundles = synchronize({stream("cam", 180, 2.0), stream("lidar", 50, 2.0)}, 50.0, 0.010);
  REQUIRE(bundles.size() == 101);
  for (const auto& b : bundles) {
    REQUIRE(b.slots[0]);
    REQUIRE(b.slots[1]);
    CHECK(std::abs(b.slots[0]->t - b.t) <= 0.010);
    CHECK(b.slots[1]->t == doctest::Approx(b.t));
    // nearest camera frame, checked against a direct scan
    double best = 1e9;
    for (int k = 0; k <= 360; ++k) best = std::min(best, std::abs(k / 180.0 - b.t));
    CHECK(std::abs(b.slots[0]->t - b.t) == doctest::Approx(best));
  }
}

TEST_CASE("slots stay empty when nothing is within tolerance") {
  const auto bundles = synchronize({{frame("a", 0.0), frame("a", 0.5)}, {frame("b", 0.03)}}, 10.0, 0.01);
  REQUIRE(bundles.size() == 6);
  CHECK(bundles[0].slots[0]);
  CHECK_FALSE(bundles[0].slots[1]);
  CHECK_FALSE(bundles[1].slots[0]);
  CHECK(bundles[5].slots[0]);
}

TEST_CASE("equidistant frames resolve to the earlier one") {
  // Dyadic times so both offsets from the 0.125 tick are exactly 1/32.
  const auto bundles = synchronize({{frame("a", 0.09375), frame("a", 0.15625)}}, 8.0, 0.03125);
  REQUIRE(bundles.size() == 2);
  REQUIRE(bundles[1].slots[0]);
  CHECK(bundles[1].slots[0]->t == 0.09375);
}

TEST_CASE("streaming poll matches the batch result") {
  const auto cam = stream("cam", 180, 1.0);
  const auto lidar = stream("lidar", 50, 1.0);
  const auto batch = synchronize({cam, lidar}, 50.0, 0.01);
  Synchronizer sync({"cam", "lidar"}, 50.0, 0.01);
  std::vector<SyncedBundle> streamed;
  std::size_t ic = 0, il = 0;
  for (int step = 0; step <= 2000; ++step) {
    const double now = step * 0.0005;
    while (ic < cam.size() && cam[ic].t <= now) sync.push(std::make_shared<const StampedFrame>(cam[ic++]));
    while (il < lidar.size() && lidar[il].t <= now) sync.push(std::make_shared<const StampedFrame>(lidar[il++]));
    for (auto& b : sync.poll(now)) streamed.push_back(std::move(b));
  }
  for (auto& b : sync.flush(1.0)) streamed.push_back(std::move(b));
  REQUIRE(streamed.size() == batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CHECK(streamed[i].t == batch[i].t);
    for (std::size_t s = 0; s < 2; ++s) {
      REQUIRE(bool(streamed[i].slots[s]) == bool(batch[i].slots[s]));
      if (batch[i].slots[s]) CHECK(streamed[i].slots[s]->t == batch[i].slots[s]->t);
    }
  }
}

TEST_CASE("unknown streams and out-of-order frames are rejected") {
  Synchronizer sync({"a"}, 10.0, 0.01);
  sync.push(std::make_shared<const StampedFrame>(frame("a", 0.2)));
  CHECK_THROWS_AS(sync.push(std::make_shared<const StampedFrame>(frame("a", 0.1))), std::invalid_argument);
  CHECK_THROWS_AS(sync.push(std::make_shared<const StampedFrame>(frame("b", 0.3))), std::invalid_argument);
  CHECK(default_tolerance(50.0) == doctest::Approx(0.01));
}

}  // TEST_SUITE
