#pragma once

#include "subt_beacon/config.hpp"
#include "subt_beacon/episode.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace subt_beacon::harness {

/// Exit codes shared by the CLI surface.
inline constexpr int kExitOk = 0;
inline constexpr int kExitThreshold = 1;
inline constexpr int kExitParse = 2;
inline constexpr int kExitCollision = 3;

/// `sim run`: one episode per seed, logs under out_dir/seed_<s>/, one
/// metrics.csv row per episode. Returns kExitCollision if any episode hit
/// a wall.
int cli_sim_run(const std::filesystem::path& scenario_path,
                const std::filesystem::path& out_dir,
                const std::optional<std::vector<std::uint64_t>>& seed_override);

/// `replay`: streams recorded event/cloud/pose logs through the detection
/// pipeline (no simulator, no tracker) and writes the detections CSV to
/// out_path, or stdout when empty.
int cli_replay(const std::filesystem::path& events_path,
               const std::filesystem::path& cloud_path,
               const std::filesystem::path& pose_path,
               const std::optional<std::filesystem::path>& scenario_path,
               const std::filesystem::path& out_path);

struct MetricsThresholds {
  std::optional<double> min_detect_rate;
  std::optional<double> max_p95_err;
};

/// `metrics`: aggregates metrics.csv across output directories; one
/// aggregate row per directory. Thresholds turn the report into a gate.
int cli_metrics(const std::vector<std::filesystem::path>& dirs,
                const MetricsThresholds& thresholds);

/// Full argv-level entry point (what main() calls); exceptions from the
/// subcommands are mapped to exit codes here.
int run_cli(int argc, const char* const* argv);

}  // namespace subt_beacon::harness
