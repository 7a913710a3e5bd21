#include "subt_beacon/episode.hpp"

#include "subt_beacon/csv.hpp"
#include "subt_beacon/log.hpp"
#include "subt_beacon/rng.hpp"
#include "subt_beacon/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace subt_beacon::episode {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return kNan;
  std::sort(values.begin(), values.end());
  const double idx = q * (values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(idx);
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = idx - lo;
  return values[lo] * (1 - frac) + values[hi] * frac;
}

std::string pose_csv_row(std::int64_t t_us, const core::Pose2D& p) {
  return std::to_string(t_us) + "," + csv::format_g9(p.x) + "," +
         csv::format_g9(p.y) + "," + csv::format_g9(p.yaw);
}

}  // namespace

std::string metrics_csv_row(const MetricsRow& row) {
  std::string out = std::to_string(row.episode);
  for (double v : {row.median_loc_err_m, row.p95_loc_err_m, row.min_dist_m,
                   row.detect_rate, row.max_loss_s}) {
    out += ',';
    out += csv::format_g9(v);
  }
  out += row.collided ? ",1" : ",0";
  return out;
}

EpisodeResult run_episode(const config::ScenarioSpec& spec, std::uint64_t seed,
                          const std::filesystem::path& out_dir) {
  spec.validate();
  EpisodeResult result;

  rng::Stream lidar_noise(rng::substream_seed(seed, "lidar-noise"));
  rng::Stream event_noise(rng::substream_seed(seed, "event-noise"));
  rng::Stream odom_noise(rng::substream_seed(seed, "odom-noise"));

  pipeline::Detector detector(spec.sensors.camera, spec.detection);
  tracker::NmpcConfig nmpc_cfg = spec.nmpc;
  std::unique_ptr<tracker::NmpcSolution> warm;

  const std::int64_t period_us = spec.sensors.lidar.period_us();
  const double dt = nmpc_cfg.dt;
  const int ticks = static_cast<int>(std::llround(spec.duration_s / dt));

  std::unique_ptr<csv::Writer> events_log, cloud_log, pose_log, det_log, ctrl_log;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    events_log = std::make_unique<csv::Writer>((out_dir / "events.csv").string(),
                                               "t_us,x,y,p");
    cloud_log = std::make_unique<csv::Writer>((out_dir / "cloud.csv").string(),
                                              "scan_id,t_us,x,y,z,intensity");
    pose_log = std::make_unique<csv::Writer>((out_dir / "pose.csv").string(),
                                             "t_us,x,y,yaw");
    det_log = std::make_unique<csv::Writer>((out_dir / "detections.csv").string(),
                                            pipeline::kDetectionsHeader);
    ctrl_log = std::make_unique<csv::Writer>(
        (out_dir / "control.csv").string(),
        "t_us,mode,v,psi,x,y,yaw,x_ref,y_ref,dist_to_target");
  }

  core::Pose2D robot = spec.robot_start;
  sim::EventSynthState synth_state;
  std::vector<events::Event> carry;  // events spilled past the last scan end
  std::vector<double> loc_errors;
  double min_dist = std::numeric_limits<double>::infinity();
  int detect_ticks = 0;
  int loss_run = 0, max_loss_run = 0;

  for (int tick = 0; tick < ticks; ++tick) {
    const std::int64_t t0 = static_cast<std::int64_t>(tick) * period_us;
    const std::int64_t t_scan = t0 + period_us;

    std::optional<sim::TargetState> target;
    if (spec.target.present) {
      target = sim::target_state_at(spec.target, (tick + 1) * dt);
    }

    const sim::RaycastResult rc =
        sim::raycast_scan(spec.world, target, spec.target, robot, spec.sensors,
                          lidar_noise, t0);
    std::vector<events::Event> fresh =
        sim::synthesize_events(rc, spec.sensors, t0, event_noise, &synth_state);

    // Merge the previous tick's spill; both inputs are sorted.
    std::vector<events::Event> batch;
    batch.reserve(carry.size() + fresh.size());
    std::merge(carry.begin(), carry.end(), fresh.begin(), fresh.end(),
               std::back_inserter(batch),
               [](const events::Event& a, const events::Event& b) {
                 return a.t_us < b.t_us;
               });
    carry.clear();
    for (const auto& e : batch) {
      // Strictly-before boundary: the next sweep's first beams fire at
      // exactly this scan's completion time and belong to the next tick.
      if (e.t_us >= t_scan) {
        carry.push_back(e);
        continue;
      }
      detector.ingest(e);
      if (events_log) {
        events_log->row(std::to_string(e.t_us) + "," + std::to_string(e.x) +
                        "," + std::to_string(e.y) + "," +
                        (e.polarity > 0 ? "1" : "0"));
      }
    }
    if (cloud_log) {
      const std::string head =
          std::to_string(tick) + "," + std::to_string(rc.scan.t_us) + ",";
      for (const auto& pt : rc.scan.points) {
        cloud_log->row(head + csv::format_g9(pt.p.x()) + "," +
                       csv::format_g9(pt.p.y()) + "," +
                       csv::format_g9(pt.p.z()) + "," +
                       csv::format_g9(pt.intensity));
      }
    }

    const pipeline::Detector::Tick det = detector.process_scan(rc.scan);
    if (det_log) det_log->row(pipeline::detection_csv_row(det, t_scan));

    core::Pose2D odom = robot;
    if (spec.odom_sigma_xy_m > 0) {
      odom.x += odom_noise.normal(0, spec.odom_sigma_xy_m);
      odom.y += odom_noise.normal(0, spec.odom_sigma_xy_m);
    }
    if (spec.odom_sigma_yaw_rad > 0) {
      odom.yaw = core::wrap_angle(odom.yaw +
                                  odom_noise.normal(0, spec.odom_sigma_yaw_rad));
    }
    if (pose_log) pose_log->row(pose_csv_row(t_scan, odom));

    const tracker::TrackingReference ref = tracker::make_reference(
        det.mode, det.focus, odom, spec.sensors.extrinsics, nmpc_cfg);
    const tracker::NmpcSolution sol =
        tracker::nmpc_solve(odom, ref, warm.get(), nmpc_cfg);
    const double v = sol.controls(0, 0);
    const double psi = sol.controls(1, 0);
    warm = std::make_unique<tracker::NmpcSolution>(sol);

    if (ctrl_log) {
      const double dist_to_target =
          ref.target_world
              ? (Eigen::Vector2d(odom.x, odom.y) - *ref.target_world).norm()
              : kNan;
      std::string row = std::to_string(t_scan);
      row += ',';
      row += tracker::to_string(det.mode);
      for (double val : {v, psi, odom.x, odom.y, odom.yaw, ref.x_ref, ref.y_ref,
                         dist_to_target}) {
        row += ',';
        row += csv::format_g9(val);
      }
      ctrl_log->row(row);
    }

    // Ground-truth bookkeeping.
    TickTrace trace;
    trace.t_us = t_scan;
    trace.mode = det.mode;
    trace.robot = robot;
    trace.range_to_target_m = kNan;
    trace.loc_err_m = kNan;
    if (target) {
      trace.range_to_target_m =
          (Eigen::Vector2d(robot.x, robot.y) - target->position).norm();
      min_dist = std::min(min_dist, trace.range_to_target_m);
    }
    if (det.mode == tracker::ScenarioMode::BothDetect) {
      ++detect_ticks;
      max_loss_run = std::max(max_loss_run, loss_run);
      loss_run = 0;
      Eigen::Vector3d gt = Eigen::Vector3d::Zero();
      int n_stripe = 0;
      for (const auto& hit : rc.hits) {
        if (hit.surface == sim::Surface::Stripe) {
          gt += hit.lidar_pos;
          ++n_stripe;
        }
      }
      if (n_stripe > 0 && det.focus.pair) {
        gt /= n_stripe;
        trace.loc_err_m = (det.focus.pair->lidar_point - gt).norm();
        loc_errors.push_back(trace.loc_err_m);
      }
    } else {
      ++loss_run;
    }
    result.trace.push_back(trace);

    robot = sim::step_robot(robot, v, psi, dt);
    bool collided = false;
    for (const auto& wall : spec.world.walls) {
      if (sim::segment_distance({robot.x, robot.y}, wall) < spec.robot_radius_m) {
        collided = true;
        break;
      }
    }
    if (collided) {
      result.collided = true;
      log::diag(1, "episode seed " + std::to_string(seed) +
                       ": wall collision at tick " + std::to_string(tick));
      break;
    }
  }
  max_loss_run = std::max(max_loss_run, loss_run);

  MetricsRow& m = result.metrics;
  m.episode = seed;
  m.median_loc_err_m = percentile(loc_errors, 0.5);
  m.p95_loc_err_m = percentile(loc_errors, 0.95);
  m.min_dist_m = std::isfinite(min_dist) ? min_dist : kNan;
  m.detect_rate = result.trace.empty()
                      ? 0.0
                      : static_cast<double>(detect_ticks) / result.trace.size();
  m.max_loss_s = max_loss_run * dt;
  m.collided = result.collided;
  return result;
}

}  // namespace subt_beacon::episode
