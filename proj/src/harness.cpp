#include "subt_beacon/harness.hpp"

#include "subt_beacon/csv.hpp"
#include "subt_beacon/log.hpp"
#include "subt_beacon/pipeline.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>

namespace subt_beacon::harness {

namespace {

using csv::ParseError;

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& part : csv::split(text, ',')) {
    if (part.empty()) throw ParseError("--seed: empty entry in seed list");
    seeds.push_back(static_cast<std::uint64_t>(
        csv::parse_int64(part, "--seed list")));
  }
  return seeds;
}

}  // namespace

int cli_sim_run(const std::filesystem::path& scenario_path,
                const std::filesystem::path& out_dir,
                const std::optional<std::vector<std::uint64_t>>& seed_override) {
  const config::ScenarioSpec spec = config::load_scenario_file(scenario_path);
  const std::vector<std::uint64_t> seeds =
      seed_override ? *seed_override : spec.seeds;
  if (seeds.empty()) throw ParseError("scenario: empty seed list");

  std::filesystem::create_directories(out_dir);
  csv::Writer metrics((out_dir / "metrics.csv").string(),
                      episode::kMetricsHeader);
  bool any_collision = false;
  for (std::uint64_t seed : seeds) {
    log::diag(1, "running '" + spec.name + "' seed " + std::to_string(seed));
    const auto seed_dir = out_dir / ("seed_" + std::to_string(seed));
    const episode::EpisodeResult result =
        episode::run_episode(spec, seed, seed_dir);
    metrics.row(episode::metrics_csv_row(result.metrics));
    any_collision = any_collision || result.collided;
  }
  metrics.flush();
  return any_collision ? kExitCollision : kExitOk;
}

int cli_replay(const std::filesystem::path& events_path,
               const std::filesystem::path& cloud_path,
               const std::filesystem::path& pose_path,
               const std::optional<std::filesystem::path>& scenario_path,
               const std::filesystem::path& out_path) {
  config::ScenarioSpec spec;
  if (scenario_path) spec = config::load_scenario_file(*scenario_path);

  csv::Reader events_in(events_path.string(), "t_us,x,y,p");
  csv::Reader cloud_in(cloud_path.string(), "scan_id,t_us,x,y,z,intensity");

  // The pose log is part of the recorded bundle; detections are all in the
  // LiDAR frame so it is validated but not consumed.
  {
    csv::Reader pose_in(pose_path.string(), "t_us,x,y,yaw");
    std::vector<std::string> fields;
    while (pose_in.next(fields)) {
      csv::parse_int64(fields[0], pose_in.context());
      for (int i = 1; i < 4; ++i) csv::parse_double(fields[i], pose_in.context());
    }
  }

  pipeline::Detector detector(spec.sensors.camera, spec.detection);

  std::ostringstream out;
  out << pipeline::kDetectionsHeader << '\n';

  std::vector<std::string> fields;
  bool have_event = false;
  events::Event pending{};
  std::int64_t last_event_t = -1;

  auto read_event = [&]() {
    if (!events_in.next(fields)) {
      have_event = false;
      return;
    }
    pending.t_us = csv::parse_int64(fields[0], events_in.context());
    const std::int64_t x = csv::parse_int64(fields[1], events_in.context());
    const std::int64_t y = csv::parse_int64(fields[2], events_in.context());
    const std::int64_t p = csv::parse_int64(fields[3], events_in.context());
    if (x < 0 || y < 0 || x > 0xffff || y > 0xffff || (p != 0 && p != 1)) {
      throw ParseError(events_in.context() + ": bad event row");
    }
    if (pending.t_us < last_event_t) {
      throw ParseError(events_in.context() + ": non-monotone event timestamps");
    }
    last_event_t = pending.t_us;
    pending.x = static_cast<std::uint16_t>(x);
    pending.y = static_cast<std::uint16_t>(y);
    pending.polarity = p == 1 ? std::int8_t{1} : std::int8_t{-1};
    have_event = true;
  };
  read_event();

  // Group cloud rows into scans (consecutive rows sharing scan_id).
  std::vector<std::string> cloud_fields;
  bool have_cloud_row = cloud_in.next(cloud_fields);
  std::int64_t last_scan_id = -1;
  while (have_cloud_row) {
    const std::int64_t scan_id =
        csv::parse_int64(cloud_fields[0], cloud_in.context());
    if (scan_id <= last_scan_id) {
      throw ParseError(cloud_in.context() + ": scan_id not increasing");
    }
    last_scan_id = scan_id;
    lidar::LidarScan scan;
    scan.t_us = csv::parse_int64(cloud_fields[1], cloud_in.context());
    while (true) {
      lidar::LidarPoint pt;
      pt.p.x() = csv::parse_double(cloud_fields[2], cloud_in.context());
      pt.p.y() = csv::parse_double(cloud_fields[3], cloud_in.context());
      pt.p.z() = csv::parse_double(cloud_fields[4], cloud_in.context());
      pt.intensity = csv::parse_double(cloud_fields[5], cloud_in.context());
      scan.points.push_back(pt);
      have_cloud_row = cloud_in.next(cloud_fields);
      if (!have_cloud_row) break;
      const std::int64_t next_id =
          csv::parse_int64(cloud_fields[0], cloud_in.context());
      if (next_id != scan_id) break;
      const std::int64_t next_t =
          csv::parse_int64(cloud_fields[1], cloud_in.context());
      if (next_t != scan.t_us) {
        throw ParseError(cloud_in.context() + ": scan rows disagree on t_us");
      }
    }

    // Same rule as the live loop: ingest everything strictly before the
    // scan completion time, then detect.
    while (have_event && pending.t_us < scan.t_us) {
      detector.ingest(pending);
      read_event();
    }
    const pipeline::Detector::Tick tick = detector.process_scan(scan);
    out << pipeline::detection_csv_row(tick, scan.t_us) << '\n';
  }

  if (out_path.empty()) {
    std::cout << out.str();
  } else {
    std::ofstream file(out_path);
    if (!file) throw std::runtime_error(out_path.string() + ": cannot open");
    file << out.str();
  }
  return kExitOk;
}

namespace {

struct Aggregate {
  std::string dir;
  int episodes = 0;
  double median_loc_err = 0, p95_loc_err = 0, min_dist = 0;
  double detect_rate = 0, max_loss = 0;
  int collided = 0;
};

double mean_ignoring_nan(const std::vector<double>& values) {
  double sum = 0;
  int n = 0;
  for (double v : values) {
    if (std::isnan(v)) continue;
    sum += v;
    ++n;
  }
  return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

int cli_metrics(const std::vector<std::filesystem::path>& dirs,
                const MetricsThresholds& thresholds) {
  if (dirs.empty()) throw ParseError("metrics: no input directories given");

  std::vector<Aggregate> report;
  for (const auto& dir : dirs) {
    const auto file = dir / "metrics.csv";
    csv::Reader in(file.string(), episode::kMetricsHeader);
    Aggregate agg;
    agg.dir = dir.string();
    std::vector<double> med, p95, min_d, rate, loss;
    std::vector<std::string> fields;
    while (in.next(fields)) {
      med.push_back(csv::parse_double(fields[1], in.context()));
      p95.push_back(csv::parse_double(fields[2], in.context()));
      min_d.push_back(csv::parse_double(fields[3], in.context()));
      rate.push_back(csv::parse_double(fields[4], in.context()));
      loss.push_back(csv::parse_double(fields[5], in.context()));
      agg.collided += csv::parse_int64(fields[6], in.context()) != 0 ? 1 : 0;
      ++agg.episodes;
    }
    if (agg.episodes == 0) throw ParseError(file.string() + ": no episodes");
    agg.median_loc_err = mean_ignoring_nan(med);
    agg.p95_loc_err = mean_ignoring_nan(p95);
    agg.min_dist = mean_ignoring_nan(min_d);
    agg.detect_rate = mean_ignoring_nan(rate);
    agg.max_loss = mean_ignoring_nan(loss);
    report.push_back(agg);
  }

  std::cout << "dir,episodes,median_loc_err_m,p95_loc_err_m,min_dist_m,"
               "detect_rate,max_loss_s,collisions\n";
  bool violated = false;
  for (const auto& agg : report) {
    std::cout << agg.dir << ',' << agg.episodes << ','
              << csv::format_g9(agg.median_loc_err) << ','
              << csv::format_g9(agg.p95_loc_err) << ','
              << csv::format_g9(agg.min_dist) << ','
              << csv::format_g9(agg.detect_rate) << ','
              << csv::format_g9(agg.max_loss) << ',' << agg.collided << '\n';
    if (thresholds.min_detect_rate &&
        !(agg.detect_rate >= *thresholds.min_detect_rate)) {
      std::cerr << agg.dir << ": detect_rate " << csv::format_g9(agg.detect_rate)
                << " below --min-detect-rate\n";
      violated = true;
    }
    if (thresholds.max_p95_err && !(agg.p95_loc_err <= *thresholds.max_p95_err)) {
      std::cerr << agg.dir << ": p95_loc_err " << csv::format_g9(agg.p95_loc_err)
                << " above --max-p95-err\n";
      violated = true;
    }
  }
  return violated ? kExitThreshold : kExitOk;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Event-camera/LiDAR reflective-marker tracking testbed"};
  app.require_subcommand(1);

  // sim run
  auto* sim_cmd = app.add_subcommand("sim", "Simulator commands");
  sim_cmd->require_subcommand(1);
  auto* run_cmd = sim_cmd->add_subcommand("run", "Run a scenario");
  std::string scenario_arg;
  std::string out_arg;
  std::string seed_arg;
  run_cmd->add_option("scenario", scenario_arg, "Scenario file")->required();
  run_cmd->add_option("--out", out_arg, "Output directory");
  run_cmd->add_option("--seed", seed_arg, "Comma-separated seed override");

  // replay
  auto* replay_cmd = app.add_subcommand("replay", "Replay recorded logs");
  std::string events_arg, cloud_arg, pose_arg, replay_scenario_arg, replay_out_arg;
  replay_cmd->add_option("--events", events_arg, "Event log")->required();
  replay_cmd->add_option("--cloud", cloud_arg, "Point-cloud log")->required();
  replay_cmd->add_option("--pose", pose_arg, "Pose log")->required();
  replay_cmd->add_option("--scenario", replay_scenario_arg,
                         "Scenario file for pipeline parameters");
  replay_cmd->add_option("--out", replay_out_arg, "Detections output file");

  // metrics
  auto* metrics_cmd = app.add_subcommand("metrics", "Aggregate metrics");
  std::vector<std::string> dirs_arg;
  MetricsThresholds thresholds;
  double min_rate = 0, max_p95 = 0;
  metrics_cmd->add_option("dirs", dirs_arg, "Output directories")->required();
  auto* min_rate_opt =
      metrics_cmd->add_option("--min-detect-rate", min_rate, "Gate: minimum rate");
  auto* max_p95_opt =
      metrics_cmd->add_option("--max-p95-err", max_p95, "Gate: max p95 error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (run_cmd->parsed()) {
      std::optional<std::vector<std::uint64_t>> seeds;
      if (!seed_arg.empty()) seeds = parse_seed_list(seed_arg);
      std::filesystem::path out = out_arg.empty()
                                      ? std::filesystem::path("out") /
                                            std::filesystem::path(scenario_arg).stem()
                                      : std::filesystem::path(out_arg);
      return cli_sim_run(scenario_arg, out, seeds);
    }
    if (replay_cmd->parsed()) {
      std::optional<std::filesystem::path> scenario;
      if (!replay_scenario_arg.empty()) scenario = replay_scenario_arg;
      return cli_replay(events_arg, cloud_arg, pose_arg, scenario,
                        replay_out_arg);
    }
    if (metrics_cmd->parsed()) {
      if (*min_rate_opt) thresholds.min_detect_rate = min_rate;
      if (*max_p95_opt) thresholds.max_p95_err = max_p95;
      std::vector<std::filesystem::path> dirs(dirs_arg.begin(), dirs_arg.end());
      return cli_metrics(dirs, thresholds);
    }
  } catch (const csv::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  }
  return kExitParse;
}

}  // namespace subt_beacon::harness
