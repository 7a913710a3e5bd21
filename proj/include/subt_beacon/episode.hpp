#pragma once

#include "subt_beacon/config.hpp"
#include "subt_beacon/pipeline.hpp"
#include "subt_beacon/tracker.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace subt_beacon::episode {

/// One row of metrics.csv.
struct MetricsRow {
  std::uint64_t episode = 0;  // the seed
  double median_loc_err_m = 0;
  double p95_loc_err_m = 0;
  double min_dist_m = 0;
  double detect_rate = 0;
  double max_loss_s = 0;
  bool collided = false;
};

inline constexpr const char* kMetricsHeader =
    "episode,median_loc_err_m,p95_loc_err_m,min_dist_m,detect_rate,max_loss_s,"
    "collided";

std::string metrics_csv_row(const MetricsRow& row);

/// Per-tick ground truth kept in memory for tests and metrics.
struct TickTrace {
  std::int64_t t_us = 0;
  tracker::ScenarioMode mode = tracker::ScenarioMode::NoneDetect;
  double range_to_target_m = 0;   // true center distance, NaN without target
  double loc_err_m = 0;           // fused vs true stripe-hit centroid, NaN when undefined
  core::Pose2D robot;             // true pose at the tick
};

struct EpisodeResult {
  MetricsRow metrics;
  std::vector<TickTrace> trace;
  bool collided = false;
};

/// Runs one closed-loop episode: target advance, raycast, event synthesis,
/// detection, scenario classification, reference, NMPC, robot step. Writes
/// the five CSV logs into out_dir when it is nonempty. All randomness
/// derives from `seed` through named sub-streams.
EpisodeResult run_episode(const config::ScenarioSpec& spec, std::uint64_t seed,
                          const std::filesystem::path& out_dir = {});

}  // namespace subt_beacon::episode
