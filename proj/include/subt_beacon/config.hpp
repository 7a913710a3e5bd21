#pragma once

#include "subt_beacon/geometry.hpp"
#include "subt_beacon/pipeline.hpp"
#include "subt_beacon/sim.hpp"
#include "subt_beacon/tracker.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace subt_beacon::config {

/// Parses a TOML-style config text ([table], [[array-of-table]], key =
/// value with strings, numbers, booleans, and possibly nested arrays)
/// into a JSON tree. Errors carry "name:line:".
nlohmann::json parse_toml(const std::string& text, const std::string& name);

/// Inverse of parse_toml for trees made of objects, arrays, and scalars.
std::string dump_toml(const nlohmann::json& tree);

/// Deep merge: `over` wins, objects merge recursively, everything else
/// replaces.
nlohmann::json merge(nlohmann::json base, const nlohmann::json& over);

inline sim::SensorSim default_sensors() {
  sim::SensorSim sensors;
  sensors.camera = core::intrinsics_from_fov(640, 480, 70.0 * core::kPi / 180.0);
  sensors.extrinsics = core::default_extrinsics(0.5, 0.08);
  return sensors;
}

/// Everything one episode needs: world, target, sensors, detection
/// pipeline, tracker, and run parameters.
struct ScenarioSpec {
  std::string name = "unnamed";
  double duration_s = 20.0;
  std::vector<std::uint64_t> seeds{1};

  sim::World world;
  sim::TargetModel target;
  sim::SensorSim sensors = default_sensors();
  double camera_hfov_deg = 70.0;
  double camera_drop_m = 0.08;

  pipeline::PipelineConfig detection;
  tracker::NmpcConfig nmpc;

  core::Pose2D robot_start;
  double robot_radius_m = 0.3;
  double odom_sigma_xy_m = 0.0;
  double odom_sigma_yaw_rad = 0.0;

  void validate() const;
};

/// Applies a config tree on top of `spec`. `base_dir` resolves referenced
/// world files. Unknown keys are rejected.
void apply_tree(ScenarioSpec& spec, const nlohmann::json& tree,
                const std::filesystem::path& base_dir);

nlohmann::json to_tree(const ScenarioSpec& spec);

std::string serialize_scenario(const ScenarioSpec& spec);

/// Loads a scenario file. A `defaults.toml` sitting next to the file is
/// applied first so scenario files only carry overrides.
ScenarioSpec load_scenario_file(const std::filesystem::path& path);

}  // namespace subt_beacon::config
