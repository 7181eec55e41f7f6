// roadfuse command line: run, replay, calibrate-roi, compare.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "roadfuse/logs.hpp"
#include "roadfuse/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

std::filesystem::path default_out() {
  if (const char* env = std::getenv("ROADFUSE_OUT"); env && *env) return env;
  return "roadfuse_out";
}

}  // namespace

int main(int argc, char** argv) {
  using namespace roadfuse;
  CLI::App app{"Roadside multi-sensor fusion simulator"};
  app.require_subcommand(1);

  RunManifest manifest;
  std::string mode = "random";
  std::vector<std::string> disabled;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool no_frame_log = false;

  auto* run_cmd = app.add_subcommand("run", "simulate, fuse and write artifacts");
  run_cmd->add_option("--scenario", manifest.scenario, "scenario JSON file")->required();
  run_cmd->add_option("--seed", seed, "override the scenario seed");
  run_cmd->add_option("--frames", manifest.frames, "fused frames (default: duration x slowest rate)");
  run_cmd->add_option("--out", out_dir, "output directory (default $ROADFUSE_OUT)");
  run_cmd->add_option("--mode", mode, "routing mode")->check(CLI::IsMember({"random", "scheduled"}));
  run_cmd->add_option("--disable", disabled, "disable a fusion branch")
      ->check(CLI::IsMember({"radar-camera", "lidar-camera"}));
  run_cmd->add_option("--cell", manifest.grid_cell, "metric grid cell size (m)");
  run_cmd->add_flag("--no-frame-log", no_frame_log, "skip the per-sensor frame log");
  run_cmd->add_flag("--parallel", manifest.parallel_agents, "fuse agents concurrently");

  std::string replay_dir;
  std::optional<double> replay_cell;
  std::string replay_out;
  auto* replay_cmd = app.add_subcommand("replay", "recompute metric grids from logs");
  replay_cmd->add_option("--run", replay_dir, "run directory")->required();
  replay_cmd->add_option("--cell", replay_cell, "grid cell size (default: as logged)");
  replay_cmd->add_option("--out", replay_out, "where to write grid files");

  std::filesystem::path calib_scenario;
  std::int64_t calib_frames = 1500;
  auto* calib_cmd = app.add_subcommand("calibrate-roi", "fit the ROI scale parameters");
  calib_cmd->add_option("--scenario", calib_scenario, "scenario JSON file")->required();
  calib_cmd->add_option("--frames", calib_frames, "frames to sample");

  std::filesystem::path cmp_scenario;
  std::vector<std::uint64_t> cmp_seeds{1, 2, 3, 4, 5};
  std::int64_t cmp_frames = 0;
  std::string cmp_out;
  auto* cmp_cmd = app.add_subcommand("compare", "random vs scheduled flow tables");
  cmp_cmd->add_option("--scenario", cmp_scenario, "scenario JSON file")->required();
  cmp_cmd->add_option("--seed", cmp_seeds, "seeds to pair")->delimiter(',');
  cmp_cmd->add_option("--frames", cmp_frames, "frame budget per run");
  cmp_cmd->add_option("--out", cmp_out, "output directory (default $ROADFUSE_OUT)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (*run_cmd) {
    manifest.mode = routing_mode_from_string(mode);
    manifest.out_dir = out_dir.empty() ? default_out() : std::filesystem::path(out_dir);
    if (run_cmd->count("--seed") > 0) manifest.seed = seed;
    for (const auto& b : disabled) {
      if (b == "radar-camera") manifest.enable_radar_camera = false;
      if (b == "lidar-camera") manifest.enable_lidar_camera = false;
    }
    manifest.write_frame_log = !no_frame_log;
    return run(manifest, std::cout);
  }

  if (*replay_cmd) {
    try {
      const MetricGrid g = replay(replay_dir, replay_cell, replay_out);
      std::cout << "pairs " << g.total_count() << "  populated cells " << g.populated_cells()
                << "\n";
      return kExitOk;
    } catch (const LogError& e) {
      std::cerr << "log error: " << e.what() << "\n";
      return kExitConfig;
    } catch (const std::exception& e) {
      std::cerr << "runtime error: " << e.what() << "\n";
      return kExitRuntime;
    }
  }

  if (*calib_cmd) {
    try {
      const ScenarioConfig cfg = load_scenario(calib_scenario);
      const RoiCalibration c = calibrate_roi(cfg, calib_frames);
      std::cout << "alpha " << c.alpha << "\nbeta " << c.beta << "\nbase_height " << c.base_height
                << "\nsamples " << c.samples << "\nrms " << c.rms
                << "\nmid_range_iou " << c.mid_range_iou << "\n";
      return kExitOk;
    } catch (const ConfigError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return kExitConfig;
    } catch (const std::exception& e) {
      std::cerr << "runtime error: " << e.what() << "\n";
      return kExitRuntime;
    }
  }

  if (*cmp_cmd) {
    try {
      const ScenarioConfig cfg = load_scenario(cmp_scenario);
      const std::filesystem::path out = cmp_out.empty() ? default_out() : std::filesystem::path(cmp_out);
      std::filesystem::create_directories(out);
      std::ofstream table(out / "flows_compare.csv", std::ios::binary | std::ios::trunc);
      bool header = true;
      for (std::uint64_t s : cmp_seeds) {
        RunManifest m;
        m.frames = cmp_frames;
        m.seed = s;
        m.mode = RoutingMode::kRandom;
        const RunSummary r = run_pipeline(cfg, m);
        m.mode = RoutingMode::kScheduled;
        const RunSummary q = run_pipeline(cfg, m);
        std::ostringstream rows;
        write_flow_table(rows, {{"random/seed" + std::to_string(s), &r.flows},
                                {"scheduled/seed" + std::to_string(s), &q.flows}});
        std::string text = rows.str();
        if (!header) text = text.substr(text.find('\n') + 1);
        header = false;
        table << text;
        std::cout << text;
      }
      return kExitOk;
    } catch (const ConfigError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return kExitConfig;
    } catch (const std::exception& e) {
      std::cerr << "runtime error: " << e.what() << "\n";
      return kExitRuntime;
    }
  }
  return kExitOk;
}
