#include "roadfuse/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <map>
#include <memory>

#include <Eigen/Dense>
#include <json.hpp>

#include "roadfuse/emulators.hpp"
#include "roadfuse/lidar_camera.hpp"
#include "roadfuse/logs.hpp"
#include "roadfuse/radar_camera.hpp"
#include "roadfuse/sync.hpp"
#include "roadfuse/world.hpp"

namespace roadfuse {

using nlohmann::json;

void RunManifest::validate() const {
  if (!enable_radar_camera && !enable_lidar_camera) {
    throw ConfigError("manifest", "at least one fusion branch must be enabled");
  }
  if (frames < 0) throw ConfigError("manifest.frames", "frame budget must be >= 1");
  if (!(grid_cell > 0.0)) throw ConfigError("manifest.grid_cell", "must be > 0");
}

namespace {

struct RadarPair {
  std::size_t radar_slot;
  std::size_t camera_slot;
  const SensorRig* radar;
  const SensorRig* camera;
};

struct Agent {
  Agent(const ScenarioConfig& cfg, std::string agent_id, std::vector<Vec2> region,
        std::vector<std::size_t> rig_indices)
      : id(std::move(agent_id)),
        polygon(std::move(region)),
        rigs(std::move(rig_indices)),
        sync(stream_ids(cfg, rigs), cfg.slowest_rate(), default_tolerance(cfg.slowest_rate())),
        tracker(cfg.fusion.tracker),
        density(cfg, cfg.scheduling.density_window, cfg.scheduling.snap_distance) {
    for (std::size_t s = 0; s < rigs.size(); ++s) {
      const SensorRig& r = cfg.rigs[rigs[s]];
      if (r.kind == SensorKind::kCamera) {
        camera_slots.push_back(s);
        cameras.push_back(*r.camera);
      } else if (r.kind == SensorKind::kLidar) {
        lidar_slots.push_back(s);
      }
    }
    for (std::size_t s = 0; s < rigs.size(); ++s) {
      const SensorRig& r = cfg.rigs[rigs[s]];
      if (r.kind != SensorKind::kRadar) continue;
      for (std::size_t c = 0; c < rigs.size(); ++c) {
        if (cfg.rigs[rigs[c]].id == r.radar.paired_camera) {
          radar_pairs.push_back({s, c, &r, &cfg.rigs[rigs[c]]});
        }
      }
    }
  }

  static std::vector<std::string> stream_ids(const ScenarioConfig& cfg,
                                             const std::vector<std::size_t>& rigs) {
    std::vector<std::string> ids;
    for (std::size_t i : rigs) ids.push_back(cfg.rigs[i].id);
    return ids;
  }

  std::string id;
  std::vector<Vec2> polygon;
  std::vector<std::size_t> rigs;
  Synchronizer sync;
  std::vector<std::size_t> camera_slots;
  std::vector<CameraModel> cameras;
  std::vector<std::size_t> lidar_slots;
  std::vector<RadarPair> radar_pairs;
  RadarCameraTracker tracker;
  DensityTracker density;
  MotionEstimator motion;
};

struct AgentOutput {
  std::vector<FusedObject> radar;
  std::vector<Detection3D> lidar;
  std::vector<MergedBox> merged;
  std::vector<DensityRecord> records;
};

std::vector<std::unique_ptr<Agent>> make_agents(const ScenarioConfig& cfg) {
  std::vector<std::unique_ptr<Agent>> agents;
  std::vector<AgentRegionSpec> specs = cfg.agents;
  if (specs.empty()) {
    specs.push_back({"agent", {{0.0, 0.0}, {cfg.field_width, 0.0},
                               {cfg.field_width, cfg.field_length}, {0.0, cfg.field_length}}});
  }
  for (const auto& a : specs) {
    std::vector<std::size_t> rigs;
    for (std::size_t i = 0; i < cfg.rigs.size(); ++i) {
      if (cfg.agents.empty() || cfg.rigs[i].agent_id == a.id) rigs.push_back(i);
    }
    agents.push_back(std::make_unique<Agent>(cfg, a.id, a.polygon, std::move(rigs)));
  }
  return agents;
}

/// Detections from several lidars of one agent: highest confidence first,
/// dropping boxes that overlap an already kept one.
std::vector<Detection3D> merge_lidars(std::vector<Detection3D> all) {
  std::stable_sort(all.begin(), all.end(), [](const Detection3D& a, const Detection3D& b) {
    return a.confidence > b.confidence;
  });
  std::vector<Detection3D> kept;
  for (auto& d : all) {
    const bool dup = std::any_of(kept.begin(), kept.end(),
                                 [&](const Detection3D& k) { return iou_bev(k.box, d.box) > 0.3; });
    if (!dup) kept.push_back(std::move(d));
  }
  return kept;
}

AgentOutput fuse_agent(const ScenarioConfig& cfg, Agent& agent, const SyncedBundle& bundle,
                       bool radar_on, bool lidar_on) {
  AgentOutput out;
  const auto frame = [&](std::size_t slot) { return bundle.slots[slot].get(); };

  if (radar_on && !agent.radar_pairs.empty()) {
    std::vector<Potential> potentials;
    for (const auto& pair : agent.radar_pairs) {
      const StampedFrame* rf = frame(pair.radar_slot);
      const StampedFrame* cf = frame(pair.camera_slot);
      if (!rf || !cf) continue;
      const auto& points = std::get<std::vector<RadarPoint>>(rf->payload);
      const auto& dets = std::get<std::vector<Detection2D>>(cf->payload);
      const CameraModel& cam = *pair.camera->camera;
      const auto rois = radar_roi(points, cam, pair.radar->pose, cfg.fusion.roi);
      for (const auto& m : iou_match(rois.rois, dets, cfg.fusion.radar_camera_gate)) {
        Potential pot = make_potential(points[rois.rois[m.roi_index].point_index],
                                       dets[m.detection_index], cam, pair.radar->pose);
        if (point_in_polygon(pot.position, agent.polygon)) potentials.push_back(pot);
      }
    }
    out.radar = agent.tracker.update(potentials, bundle.t);
    for (const auto& o : out.radar) out.records.push_back({o.position, o.velocity});
  }

  if (lidar_on && !agent.lidar_slots.empty() && !agent.cameras.empty()) {
    std::vector<Detection3D> all;
    for (std::size_t s : agent.lidar_slots) {
      if (const StampedFrame* f = frame(s)) {
        // Boxes outside the agent's region belong to a neighbor's instance.
        for (const auto& d : std::get<std::vector<Detection3D>>(f->payload)) {
          if (point_in_polygon(d.box.center().head<2>(), agent.polygon)) all.push_back(d);
        }
      }
    }
    out.lidar = merge_lidars(std::move(all));
    std::vector<std::vector<Detection2D>> d2(agent.cameras.size());
    for (std::size_t c = 0; c < agent.camera_slots.size(); ++c) {
      if (const StampedFrame* f = frame(agent.camera_slots[c])) {
        d2[c] = std::get<std::vector<Detection2D>>(f->payload);
      }
    }
    const auto ledger = box_match(out.lidar, d2, agent.cameras, cfg.fusion.lidar_camera_gate);
    out.merged = merge_boxes(ledger, out.lidar, d2, agent.cameras, cfg.fusion.merge);
    std::vector<Vec2> positions;
    for (const auto& m : out.merged) positions.push_back(m.box.center().head<2>());
    const auto vel = agent.motion.observe(bundle.t, positions);
    for (std::size_t i = 0; i < positions.size(); ++i) out.records.push_back({positions[i], vel[i]});
  }
  agent.density.add_frame(bundle.t, out.records);
  return out;
}

std::vector<std::size_t> in_region(const std::vector<VehicleState>& truth,
                                   const std::vector<Vec2>& polygon) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (point_in_polygon(truth[i].position, polygon)) idx.push_back(i);
  }
  return idx;
}

void evaluate_boxes(const std::vector<VehicleState>& truth, const std::vector<Vec2>& polygon,
                    const std::vector<Box3D>& boxes, double t, MetricGrid& grid,
                    BranchCounters& counters) {
  const auto idx = in_region(truth, polygon);
  std::vector<Vec2> tp;
  for (std::size_t i : idx) tp.push_back(truth[i].position);
  std::vector<Vec2> dp;
  for (const auto& b : boxes) dp.push_back(b.center().head<2>());
  const auto m = match_for_evaluation(tp, dp);
  counters.truths += tp.size();
  counters.detections += dp.size();
  counters.matched += m.pairs.size();
  counters.missed += m.missed.size();
  counters.false_detections += m.false_detections.size();
  for (const auto& [ti, di] : m.pairs) {
    const VehicleState& v = truth[idx[ti]];
    const EvalPair pair = EvalPair::make(v.position, v.yaw, dp[di], boxes[di].yaw(), t);
    grid.add(pair, iou_bev(vehicle_box(v), boxes[di]));
  }
}

json counters_json(const BranchCounters& c) {
  return json{{"detections", c.detections},
              {"truths", c.truths},
              {"matched", c.matched},
              {"missed", c.missed},
              {"false_detections", c.false_detections}};
}

json vehicle_json(const VehicleState& v) {
  return json{{"id", v.id},       {"x", v.position.x()}, {"y", v.position.y()},
              {"yaw", v.yaw},     {"speed", v.speed},    {"l", v.dims.length},
              {"w", v.dims.width}, {"h", v.dims.height}};
}

VehicleState vehicle_from_json(const json& j, double t) {
  VehicleState v;
  v.id = j.at("id").get<int>();
  v.position = {j.at("x").get<double>(), j.at("y").get<double>()};
  v.yaw = j.at("yaw").get<double>();
  v.speed = j.at("speed").get<double>();
  v.dims = {j.at("l").get<double>(), j.at("w").get<double>(), j.at("h").get<double>()};
  v.t = t;
  return v;
}

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << s;
}

std::vector<IntersectionZone> sorted_zones(std::vector<IntersectionZone> z) {
  std::sort(z.begin(), z.end(), [](const auto& a, const auto& b) { return a.number < b.number; });
  return z;
}

}  // namespace

void write_grids(const MetricGrid& grid, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (GridMetric m : {GridMetric::kPoseError, GridMetric::kAos, GridMetric::kBevIou,
                       GridMetric::kCount}) {
    std::ofstream out(dir / (std::string(to_string(m)) + ".csv"), std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write grid files in " + dir.string());
    grid.write_csv(out, m);
  }
}

void write_flow_table(std::ostream& out,
                      const std::vector<std::pair<std::string, const FlowCounter*>>& rows) {
  if (rows.empty()) return;
  out << "mode";
  for (const auto& z : rows.front().second->zones()) out << ",No." << z.number;
  out << ",total\n";
  for (const auto& [label, fc] : rows) {
    out << label;
    for (auto c : fc->counts()) out << ',' << c;
    out << ',' << fc->total() << "\n";
  }
}

RunSummary run_pipeline(const ScenarioConfig& base, const RunManifest& manifest) {
  manifest.validate();
  ScenarioConfig cfg = base;
  if (manifest.seed) cfg.seed = *manifest.seed;
  const bool radar_on = cfg.enable_radar_camera && manifest.enable_radar_camera;
  const bool lidar_on = cfg.enable_lidar_camera && manifest.enable_lidar_camera;
  if (!radar_on && !lidar_on) {
    throw ConfigError("manifest", "at least one fusion branch must be enabled");
  }
  if (cfg.rigs.empty()) throw ConfigError("sensor_rigs", "no sensor rigs configured");

  const double ref_rate = cfg.slowest_rate();
  const std::int64_t budget =
      manifest.frames > 0 ? manifest.frames
                          : static_cast<std::int64_t>(std::floor(cfg.duration * ref_rate + 1e-9));
  if (budget < 1) throw ConfigError("manifest.frames", "frame budget must be >= 1");

  const bool write = !manifest.out_dir.empty();
  std::unique_ptr<JsonlWriter> frames_log, tracks_log, truth_log;
  std::ofstream density_csv;
  if (write) {
    std::filesystem::create_directories(manifest.out_dir);
    if (manifest.write_frame_log) {
      frames_log = std::make_unique<JsonlWriter>(manifest.out_dir / "frames.jsonl", kFramesSchema);
    }
    tracks_log = std::make_unique<JsonlWriter>(manifest.out_dir / "tracks.jsonl", kTracksSchema);
    json agents = json::array();
    if (cfg.agents.empty()) {
      agents.push_back({{"id", "agent"},
                        {"polygon", {{0.0, 0.0}, {cfg.field_width, 0.0},
                                     {cfg.field_width, cfg.field_length}, {0.0, cfg.field_length}}}});
    }
    for (const auto& a : cfg.agents) {
      json poly = json::array();
      for (const auto& p : a.polygon) poly.push_back({p.x(), p.y()});
      agents.push_back({{"id", a.id}, {"polygon", poly}});
    }
    truth_log = std::make_unique<JsonlWriter>(
        manifest.out_dir / "truth.jsonl", kTruthSchema,
        json{{"field", {{"width", cfg.field_width}, {"length", cfg.field_length}}},
             {"cell", manifest.grid_cell},
             {"agents", agents}});
    density_csv.open(manifest.out_dir / "density.csv", std::ios::binary | std::ios::trunc);
    density_csv << "t,edge,from,to,count,mean_speed\n";
  }

  WorldState world = initial_world(cfg);
  TripController trips(cfg, manifest.mode, cfg.seed);
  const RouteProvider provider = trips.provider();
  auto agents = make_agents(cfg);
  std::vector<std::size_t> rig_agent(cfg.rigs.size(), 0);
  std::vector<std::size_t> rig_slot(cfg.rigs.size(), 0);
  for (std::size_t a = 0; a < agents.size(); ++a) {
    for (std::size_t s = 0; s < agents[a]->rigs.size(); ++s) {
      rig_agent[agents[a]->rigs[s]] = a;
      rig_slot[agents[a]->rigs[s]] = s;
    }
  }
  std::vector<Rng> rngs;
  for (const auto& r : cfg.rigs) rngs.push_back(make_substream(cfg.seed, "sensor/" + r.id));

  std::vector<AgentRegionSpec> region_specs;
  for (const auto& a : agents) region_specs.push_back({a->id, a->polygon});
  const auto regions = assign_agents(cfg.graph, region_specs, cfg.rigs);
  const auto owner = ownership_table(cfg.graph, regions);
  const auto window_frames = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(std::llround(cfg.scheduling.density_window * ref_rate)));

  RunSummary summary;
  summary.grid = MetricGrid(cfg.field_width, cfg.field_length, manifest.grid_cell);
  summary.flows = FlowCounter(sorted_zones(cfg.intersections));
  std::vector<Vec2> raw_obs, filtered_obs, truth_obs;
  std::map<std::int64_t, std::vector<VehicleState>> truth_at;
  std::int64_t truth_ticks = 0;
  std::int64_t processed = 0;

  const auto wall0 = std::chrono::steady_clock::now();
  const std::int64_t max_steps =
      static_cast<std::int64_t>(std::ceil((static_cast<double>(budget) / ref_rate + 1.0) / cfg.tick));
  for (std::int64_t step = 0; processed < budget && step < max_steps; ++step) {
    const double t = static_cast<double>(step) * cfg.tick;
    const auto states = vehicle_states(cfg, world);

    if (fires_at(ref_rate, cfg.tick, step)) {
      for (const auto& v : states) summary.flows.observe(v.id, v.position);
      if (truth_log) {
        json vs = json::array();
        for (const auto& v : states) vs.push_back(vehicle_json(v));
        truth_log->write({{"frame", truth_ticks}, {"t", t}, {"vehicles", std::move(vs)}});
      }
      truth_at.emplace(truth_ticks++, states);
    }

    for (std::size_t r = 0; r < cfg.rigs.size(); ++r) {
      const SensorRig& rig = cfg.rigs[r];
      if (!fires_at(rig.rate, cfg.tick, step)) continue;
      if (rig.halt_at && t >= *rig.halt_at) continue;
      auto frame = std::make_shared<const StampedFrame>(sense(rig, states, cfg.noise, rngs[r], t));
      if (frames_log) frames_log->write(frame_to_json(*frame));
      agents[rig_agent[r]]->sync.push(std::move(frame));
    }

    std::vector<std::vector<SyncedBundle>> bundles(agents.size());
    for (std::size_t a = 0; a < agents.size(); ++a) bundles[a] = agents[a]->sync.poll(t);
    const std::size_t n_bundles = bundles.empty() ? 0 : bundles.front().size();
    for (std::size_t b = 0; b < n_bundles && processed < budget; ++b) {
      const std::int64_t k = bundles.front()[b].index;
      std::vector<AgentOutput> outputs(agents.size());
      if (manifest.parallel_agents && agents.size() > 1) {
        std::vector<std::future<AgentOutput>> futs;
        for (std::size_t a = 0; a < agents.size(); ++a) {
          futs.push_back(std::async(std::launch::async, [&, a] {
            return fuse_agent(cfg, *agents[a], bundles[a][b], radar_on, lidar_on);
          }));
        }
        for (std::size_t a = 0; a < agents.size(); ++a) outputs[a] = futs[a].get();
      } else {
        for (std::size_t a = 0; a < agents.size(); ++a) {
          outputs[a] = fuse_agent(cfg, *agents[a], bundles[a][b], radar_on, lidar_on);
        }
      }

      const auto truth_it = truth_at.find(k);
      static const std::vector<VehicleState> kNoTruth;
      const auto& truth = truth_it != truth_at.end() ? truth_it->second : kNoTruth;
      const double tk = bundles.front()[b].t;
      for (std::size_t a = 0; a < agents.size(); ++a) {
        const Agent& agent = *agents[a];
        const AgentOutput& out = outputs[a];
        if (!out.radar.empty() || !agent.radar_pairs.empty()) {
          std::vector<Vec2> tp, dp;
          const auto idx = in_region(truth, agent.polygon);
          for (std::size_t i : idx) tp.push_back(truth[i].position);
          for (const auto& o : out.radar) dp.push_back(o.position);
          const auto m = match_for_evaluation(tp, dp);
          auto& c = summary.radar_camera;
          c.truths += radar_on ? tp.size() : 0;
          c.detections += dp.size();
          c.matched += m.pairs.size();
          c.missed += radar_on ? m.missed.size() : 0;
          c.false_detections += m.false_detections.size();
          for (const auto& [ti, di] : m.pairs) {
            raw_obs.push_back(out.radar[di].observation);
            filtered_obs.push_back(out.radar[di].position);
            truth_obs.push_back(tp[ti]);
          }
        }
        std::vector<Box3D> boxes;
        for (const auto& mb : out.merged) boxes.push_back(mb.box);
        if (lidar_on && !agent.lidar_slots.empty()) {
          evaluate_boxes(truth, agent.polygon, boxes, tk, summary.grid, summary.lidar_camera);
        }
        if (tracks_log) {
          for (const auto& o : out.radar) {
            tracks_log->write({{"frame", k},
                               {"t", tk},
                               {"agent", agent.id},
                               {"source", to_string(FusionSource::kRadarCamera)},
                               {"track", o.track_id},
                               {"x", o.position.x()},
                               {"y", o.position.y()},
                               {"vx", o.velocity.x()},
                               {"vy", o.velocity.y()},
                               {"ox", o.observation.x()},
                               {"oy", o.observation.y()},
                               {"conf", o.confidence}});
          }
          for (const auto& mb : out.merged) {
            tracks_log->write({{"frame", k},
                               {"t", tk},
                               {"agent", agent.id},
                               {"source", to_string(FusionSource::kLidarCamera)},
                               {"box", box3d_to_json(mb.box)},
                               {"contributors", mb.contributors.size()},
                               {"conf", mb.confidence}});
          }
        }
      }
      if (truth_it != truth_at.end()) truth_at.erase(truth_at.begin(), std::next(truth_it));

      if ((k + 1) % window_frames == 0) {
        std::vector<DensitySpeedMap> maps;
        for (const auto& a : agents) maps.push_back(a->density.snapshot());
        DensitySpeedMap merged = aggregate_maps(maps, owner);
        merged.t = tk;
        if (density_csv.is_open()) {
          density_csv.precision(17);
          for (std::size_t e = 0; e < merged.segments.size(); ++e) {
            const auto& s = merged.segments[e];
            const auto& edge = cfg.graph.edges()[e];
            density_csv << tk << ',' << e << ',' << cfg.graph.nodes()[edge.from].id << ','
                        << cfg.graph.nodes()[edge.to].id << ',' << s.count << ',';
            if (s.mean_speed) density_csv << *s.mean_speed;
            density_csv << "\n";
          }
        }
        if (manifest.mode == RoutingMode::kScheduled) trips.set_map(std::move(merged));
      }
      ++processed;
    }

    trips.replan(world);
    const auto events = advance_world(cfg, world, cfg.tick, provider);
    summary.respawns += events.respawned.size();
  }
  const auto wall1 = std::chrono::steady_clock::now();

  summary.frames = processed;
  summary.throughput.frames = processed;
  summary.throughput.wall_seconds = std::chrono::duration<double>(wall1 - wall0).count();
  summary.throughput.fps = summary.throughput.wall_seconds > 0.0
                               ? static_cast<double>(processed) / summary.throughput.wall_seconds
                               : 0.0;
  summary.throughput.sim_seconds = static_cast<double>(processed) / ref_rate;
  summary.reroutes = trips.reroutes();
  summary.records_consumed = trips.records_consumed();
  if (!truth_obs.empty()) {
    std::vector<std::optional<Vec2>> filtered(filtered_obs.begin(), filtered_obs.end());
    summary.filter = filter_report(raw_obs, filtered, truth_obs);
  }

  if (write) {
    if (frames_log) frames_log->close();
    tracks_log->close();
    truth_log->close();
    density_csv.close();
    write_grids(summary.grid, manifest.out_dir);
    {
      std::ofstream flows(manifest.out_dir / "flows.csv", std::ios::binary | std::ios::trunc);
      write_flow_table(flows, {{to_string(manifest.mode), &summary.flows}});
    }
    write_text(manifest.out_dir / "throughput.json",
               json{{"frames", summary.throughput.frames},
                    {"wall_seconds", summary.throughput.wall_seconds},
                    {"fps", summary.throughput.fps},
                    {"sim_seconds", summary.throughput.sim_seconds}}
                       .dump(2) + "\n");
    json levels = json::array();
    if (summary.filter) {
      const auto& f = *summary.filter;
      levels.push_back({{"position_variance", cfg.noise.radar.position_variance},
                        {"range_sigma", cfg.noise.radar.range_sigma},
                        {"samples", f.samples},
                        {"mse_raw", f.mse_raw},
                        {"mse_filtered", f.mse_filtered},
                        {"reduction_pct", f.reduction_pct}});
    }
    write_text(manifest.out_dir / "filter_report.json", json{{"levels", levels}}.dump(2) + "\n");
    write_text(manifest.out_dir / "eval.json",
               json{{"frames", summary.frames},
                    {"radar_camera", counters_json(summary.radar_camera)},
                    {"lidar_camera", counters_json(summary.lidar_camera)},
                    {"respawns", summary.respawns},
                    {"reroutes", summary.reroutes},
                    {"planner_records_consumed", summary.records_consumed},
                    {"planner_reads_ground_truth", false}}
                       .dump(2) + "\n");
    write_text(manifest.out_dir / "manifest.json",
               json{{"scenario", manifest.scenario.string()},
                    {"mode", to_string(manifest.mode)},
                    {"frames", budget},
                    {"seed", cfg.seed},
                    {"enable_radar_camera", radar_on},
                    {"enable_lidar_camera", lidar_on},
                    {"enable_scheduling", manifest.mode == RoutingMode::kScheduled},
                    {"grid_cell", manifest.grid_cell}}
                       .dump(2) + "\n");
  }
  return summary;
}

int run(const RunManifest& manifest, std::ostream& log) {
  ScenarioConfig cfg;
  try {
    manifest.validate();
    cfg = load_scenario(manifest.scenario);
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return 1;
  }
  try {
    const RunSummary s = run_pipeline(cfg, manifest);
    log << "frames " << s.frames << "  fps " << s.throughput.fps << "  flow total "
        << s.flows.total() << "  peak " << s.flows.peak() << "\n";
    return 0;
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    log << "runtime error: " << e.what() << "\n";
    return 2;
  }
}

MetricGrid replay(const std::filesystem::path& run_dir, std::optional<double> cell,
                  const std::filesystem::path& out_dir) {
  std::map<std::int64_t, std::map<std::string, std::vector<Box3D>>> boxes;
  read_jsonl(run_dir / "tracks.jsonl", kTracksSchema, [&](const json& j, std::size_t) {
    if (j.at("source").get<std::string>() != to_string(FusionSource::kLidarCamera)) return;
    boxes[j.at("frame").get<std::int64_t>()][j.at("agent").get<std::string>()].push_back(
        box3d_from_json(j.at("box")));
  });

  std::vector<std::pair<std::string, std::vector<Vec2>>> agents;
  std::optional<MetricGrid> grid;
  BranchCounters counters;
  const std::filesystem::path truth_path = run_dir / "truth.jsonl";
  const auto on_header = [&](const json& h) {
    const double c = cell ? *cell : h.at("cell").get<double>();
    grid.emplace(h.at("field").at("width").get<double>(), h.at("field").at("length").get<double>(),
                 c);
    for (const auto& a : h.at("agents")) {
      std::vector<Vec2> poly;
      for (const auto& p : a.at("polygon")) poly.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
      agents.emplace_back(a.at("id").get<std::string>(), std::move(poly));
    }
  };
  const auto on_record = [&](const json& j, std::size_t line) {
    if (!grid) throw LogError(truth_path.string(), line, "records before header fields");
    const std::int64_t k = j.at("frame").get<std::int64_t>();
    const double t = j.at("t").get<double>();
    std::vector<VehicleState> truth;
    for (const auto& v : j.at("vehicles")) truth.push_back(vehicle_from_json(v, t));
    const auto fb = boxes.find(k);
    for (const auto& [id, poly] : agents) {
      static const std::vector<Box3D> kNone;
      const std::vector<Box3D>* b = &kNone;
      if (fb != boxes.end()) {
        const auto ab = fb->second.find(id);
        if (ab != fb->second.end()) b = &ab->second;
      }
      evaluate_boxes(truth, poly, *b, t, *grid, counters);
    }
  };
  read_jsonl(truth_path, kTruthSchema, on_record, on_header);
  if (!grid) throw LogError(truth_path.string(), 1, "log has no frames");
  if (!out_dir.empty()) write_grids(*grid, out_dir);
  return *grid;
}

RoiCalibration calibrate_roi(const ScenarioConfig& base, std::int64_t frames) {
  ScenarioConfig cfg = base;
  cfg.noise = NoiseProfile{};
  WorldState world = initial_world(cfg);
  TripController trips(cfg, RoutingMode::kRandom, cfg.seed);
  const RouteProvider provider = trips.provider();
  const double ref_rate = cfg.slowest_rate();
  Rng rng(0);
  struct Sample {
    double d;
    double max_range;
    Box2D roi_center_box;  // detection box re-centered on the POI
    Box2D det;
  };
  std::vector<Sample> samples;
  std::int64_t seen = 0;
  for (std::int64_t step = 0; seen < frames; ++step) {
    if (fires_at(ref_rate, cfg.tick, step)) {
      ++seen;
      const auto states = vehicle_states(cfg, world);
      for (const auto& radar : cfg.rigs) {
        if (radar.kind != SensorKind::kRadar) continue;
        const SensorRig* cam = cfg.rig(radar.radar.paired_camera);
        const auto rf = sense_radar(radar, states, cfg.noise.radar, rng, world.t);
        const auto cf = sense_camera(*cam, states, cfg.noise.camera, rng, world.t);
        const auto& pts = std::get<std::vector<RadarPoint>>(rf.payload);
        const auto& dets = std::get<std::vector<Detection2D>>(cf.payload);
        const auto rois = radar_roi(pts, *cam->camera, radar.pose, cfg.fusion.roi);
        for (const auto& r : rois.rois) {
          for (const auto& d : dets) {
            if (d.source_vehicle != pts[r.point_index].source_vehicle || !(d.box.area() > 0.0)) continue;
            samples.push_back({r.distance, radar.radar.max_range,
                               Box2D::centered(r.poi, d.box.width(), d.box.height()), d.box});
          }
        }
      }
    }
    advance_world(cfg, world, cfg.tick, provider);
  }
  if (samples.size() < 2) throw std::runtime_error("too few radar/camera samples to calibrate");

  // The box aspect changes with viewing angle, so the base height is chosen
  // among aspect quantiles by the mean IOU it reaches on mid-range returns
  // (middle third of the radar range).
  const auto mid = [](const Sample& s) {
    return s.d >= s.max_range / 3.0 && s.d <= 2.0 * s.max_range / 3.0;
  };
  std::vector<double> aspects;
  for (const auto& s : samples) aspects.push_back(s.det.height() / s.det.width());
  std::sort(aspects.begin(), aspects.end());

  const double base_width = cfg.fusion.roi.base_width;
  const auto fit = [&](double base_height) {
    const double base_area = base_width * base_height;
    Eigen::MatrixXd a(static_cast<Eigen::Index>(samples.size()), 2);
    Eigen::VectorXd b(static_cast<Eigen::Index>(samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      a(row, 0) = 1.0 / samples[i].d;
      a(row, 1) = 1.0;
      b(row) = std::sqrt(samples[i].det.area() / base_area);
    }
    const Eigen::Vector2d x = a.colPivHouseholderQr().solve(b);
    RoiCalibration c;
    c.alpha = x(0);
    c.beta = x(1);
    c.base_height = base_height;
    c.samples = samples.size();
    c.rms = std::sqrt((a * x - b).squaredNorm() / static_cast<double>(samples.size()));
    double iou_sum = 0.0;
    std::size_t n = 0;
    for (const auto& s : samples) {
      if (!mid(s)) continue;
      const double scale = c.alpha / s.d + c.beta;
      const Box2D roi = Box2D::centered(s.roi_center_box.center(), base_width * scale,
                                        base_height * scale);
      iou_sum += iou_axis_aligned(roi, s.det);
      ++n;
    }
    c.mid_range_iou = n > 0 ? iou_sum / static_cast<double>(n) : 0.0;
    return c;
  };

  RoiCalibration out;
  constexpr int kQuantiles = 40;
  for (int q = 0; q <= kQuantiles; ++q) {
    const auto i = static_cast<std::size_t>(q * static_cast<double>(aspects.size() - 1) / kQuantiles);
    const RoiCalibration c = fit(base_width * aspects[i]);
    if (q == 0 || c.mid_range_iou > out.mid_range_iou) out = c;
  }
  return out;
}

}  // namespace roadfuse
