#pragma once

#include "subt_beacon/events.hpp"
#include "subt_beacon/geometry.hpp"
#include "subt_beacon/lidar.hpp"
#include "subt_beacon/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

namespace subt_beacon::sim {

struct WallSegment {
  Eigen::Vector2d a{0, 0}, b{0, 0};
};

/// Retroreflective sign: a vertical rectangle facing `normal_yaw`.
struct MarkerRect {
  Eigen::Vector3d center{0, 0, 0};
  double width = 0.5;   // horizontal extent, m
  double height = 0.5;  // vertical extent, m
  double normal_yaw = 0;
};

/// 2.5D world: vertical walls over 2D segments plus static signs.
struct World {
  std::vector<WallSegment> walls;
  double wall_height = 3.0;
  std::vector<MarkerRect> markers;
};

/// Walking human wearing a vest: a body cylinder with horizontal
/// retroreflective bands wrapped around it at the stripe heights.
struct TargetModel {
  bool present = true;
  std::vector<Eigen::Vector2d> waypoints{{3, 0}};
  double speed_mps = 0.75;
  bool loop = false;
  std::vector<double> stripe_heights{1.0, 1.3};
  double stripe_width_m = 0.4;  // vertical extent of each band
  double body_radius_m = 0.2;
  double body_height_m = 1.8;
};

struct TargetState {
  Eigen::Vector2d position{0, 0};
  double heading = 0;
};

/// Pose after walking the waypoint polyline for `time_s` at the model's
/// speed; clamps at the path end unless the model loops.
TargetState target_state_at(const TargetModel& target, double time_s);

struct LidarSimConfig {
  int rings = 128;
  int azimuth_bins = 512;
  double rate_hz = 10.0;
  double max_range_m = 15.0;
  double range_sigma_m = 0.02;
  double vfov_deg = 90.0;       // symmetric about the horizon
  double mount_height_m = 0.5;  // above the body origin
  double marker_intensity_mean = 2500, marker_intensity_sigma = 100;
  double wall_intensity_mean = 80, wall_intensity_sigma = 40;

  std::int64_t period_us() const {
    return static_cast<std::int64_t>(std::llround(1e6 / rate_hz));
  }
};

/// Blinding light source: a pixel disc emitting noise events. Aperiodic
/// (uniform arrival times) by default; the periodic mode makes every disc
/// pixel blink at per_pixel_hz, the adversarial in-band case.
struct LampConfig {
  bool enabled = false;
  double center_u = 560, center_v = 400;
  double radius_px = 70;
  double rate_hz = 1000;  // aggregate event rate over the disc
  bool periodic = false;
  double per_pixel_hz = 10;
};

/// Synthetic blink population, stands in for another robot's LiDAR
/// sweeping the scene at its own rate.
struct BlinkerRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // [x0, x1) x [y0, y1)
  double freq_hz = 10;
};

struct EventSimConfig {
  double background_rate_hz_per_px = 0.02;
  std::int64_t pulse_width_us = 1000;
  // A returning pulse lights a small pixel disc (beam footprint plus pixel
  // response), not a lone pixel; 0 reduces to one pixel per hit.
  double spot_radius_px = 4.0;
  // Pixel dead time: re-illumination inside the window emits no new event,
  // which keeps sweep overlaps from corrupting the inter-event interval.
  std::int64_t refractory_us = 2000;
  LampConfig lamp;
  std::vector<BlinkerRect> blinkers;
};

struct SensorSim {
  LidarSimConfig lidar;
  core::CameraIntrinsics camera;
  core::Extrinsics extrinsics;
  EventSimConfig events;
};

enum class Surface : std::uint8_t { Wall, Sign, Stripe, Body };

/// Ground truth for one returned beam; positions are the true (noiseless)
/// hit, kept for event synthesis and test oracles.
struct RayHit {
  Surface surface = Surface::Wall;
  int ring = 0, az_bin = 0;
  Eigen::Vector3d world_pos{0, 0, 0};
  Eigen::Vector3d lidar_pos{0, 0, 0};
};

/// Scan plus per-point ground truth labels (hits[i] describes
/// scan.points[i]). Measured point coordinates carry the range noise and
/// are quantized to the log precision so a replay sees the same numbers.
struct RaycastResult {
  lidar::LidarScan scan;
  std::vector<RayHit> hits;
};

RaycastResult raycast_scan(const World& world,
                           const std::optional<TargetState>& target,
                           const TargetModel& target_model,
                           const core::Pose2D& robot, const SensorSim& sensors,
                           rng::Stream& noise, std::int64_t t_scan_start_us);

/// Per-pixel refractory memory carried across scans so pixels re-lit at
/// the azimuth wrap of consecutive sweeps fire once, not twice.
struct EventSynthState {
  std::unordered_map<std::uint32_t, std::int64_t> last_emit_us;
};

/// Events induced by the scan's reflective-surface hits (a polarity pair
/// per lit pixel, pulse_width apart) plus background, lamp, and blinker
/// noise over the scan interval. Sorted by time.
std::vector<events::Event> synthesize_events(const RaycastResult& rc,
                                             const SensorSim& sensors,
                                             std::int64_t t_scan_start_us,
                                             rng::Stream& noise,
                                             EventSynthState* state = nullptr);

/// Exact unicycle Euler step; the same model the NMPC predicts with.
core::Pose2D step_robot(const core::Pose2D& pose, double v, double psi,
                        double dt);

/// Distance from a point to a 2D segment.
double segment_distance(const Eigen::Vector2d& p, const WallSegment& seg);

}  // namespace subt_beacon::sim
