#include "subt_beacon/sim.hpp"

#include "subt_beacon/csv.hpp"

#include <algorithm>
#include <cmath>

namespace subt_beacon::sim {

TargetState target_state_at(const TargetModel& target, double time_s) {
  TargetState state;
  if (target.waypoints.empty()) return state;
  state.position = target.waypoints.front();
  if (target.waypoints.size() == 1 || target.speed_mps <= 0) return state;

  double total = 0;
  for (std::size_t i = 0; i + 1 < target.waypoints.size(); ++i) {
    total += (target.waypoints[i + 1] - target.waypoints[i]).norm();
  }
  if (total <= 0) return state;

  double s = target.speed_mps * time_s;
  if (target.loop) {
    s = std::fmod(s, total);
  } else {
    s = std::min(s, total);
  }
  for (std::size_t i = 0; i + 1 < target.waypoints.size(); ++i) {
    const Eigen::Vector2d seg = target.waypoints[i + 1] - target.waypoints[i];
    const double len = seg.norm();
    if (len <= 0) continue;
    if (s <= len || i + 2 == target.waypoints.size()) {
      const double f = std::min(s / len, 1.0);
      state.position = target.waypoints[i] + f * seg;
      state.heading = std::atan2(seg.y(), seg.x());
      return state;
    }
    s -= len;
  }
  state.position = target.waypoints.back();
  return state;
}

namespace {

bool on_stripe(double z, const TargetModel& model) {
  for (double h : model.stripe_heights) {
    if (std::abs(z - h) <= model.stripe_width_m / 2) return true;
  }
  return false;
}

/// Nearest-hit accumulator over the (azimuth, ring) beam grid. Surfaces
/// are rasterized one at a time into the azimuth sector they subtend,
/// which keeps the work per sweep proportional to what is actually
/// visible instead of beams x surfaces.
struct BeamGrid {
  int n_az, n_rings;
  std::vector<double> range;    // best so far, init max_range
  std::vector<Surface> surface;
  std::vector<double> az_dx, az_dy;      // world-frame beam azimuth
  std::vector<double> cos_el, sin_el, tan_el;

  BeamGrid(const LidarSimConfig& lid, double yaw)
      : n_az(lid.azimuth_bins),
        n_rings(lid.rings),
        range(static_cast<std::size_t>(n_az) * n_rings, lid.max_range_m),
        surface(static_cast<std::size_t>(n_az) * n_rings, Surface::Wall),
        az_dx(n_az),
        az_dy(n_az),
        cos_el(n_rings),
        sin_el(n_rings),
        tan_el(n_rings) {
    const double cy = std::cos(yaw), sy = std::sin(yaw);
    for (int az = 0; az < n_az; ++az) {
      const double phi = 2.0 * core::kPi * az / n_az;
      const double cp = std::cos(phi), sp = std::sin(phi);
      az_dx[az] = cy * cp - sy * sp;
      az_dy[az] = sy * cp + cy * sp;
    }
    const double vfov = lid.vfov_deg * core::kPi / 180.0;
    for (int r = 0; r < n_rings; ++r) {
      const double elev = n_rings > 1 ? -vfov / 2 + vfov * r / (n_rings - 1) : 0.0;
      cos_el[r] = std::cos(elev);
      sin_el[r] = std::sin(elev);
      tan_el[r] = std::tan(elev);
    }
  }

  std::size_t at(int az, int ring) const {
    return static_cast<std::size_t>(az) * n_rings + ring;
  }

  /// Calls f(az) for every azimuth bin whose world angle lies within
  /// [lo, hi] (radians, hi >= lo), padded by one bin on each side.
  template <typename F>
  void for_sector(double yaw, double lo, double hi, F&& f) const {
    const double step = 2.0 * core::kPi / n_az;
    int k_lo = static_cast<int>(std::floor((lo - yaw) / step)) - 1;
    int k_hi = static_cast<int>(std::ceil((hi - yaw) / step)) + 1;
    if (k_hi - k_lo + 1 >= n_az) {
      k_lo = 0;
      k_hi = n_az - 1;
    }
    for (int k = k_lo; k <= k_hi; ++k) {
      f(((k % n_az) + n_az) % n_az);
    }
  }
};

/// Angular interval a 2D direction set subtends, as [lo, lo + width].
struct Sector {
  double lo = 0, width = 0;
};

Sector sector_of_segment(const Eigen::Vector2d& o, const Eigen::Vector2d& a,
                         const Eigen::Vector2d& b) {
  const double alpha = std::atan2(a.y() - o.y(), a.x() - o.x());
  const double beta = std::atan2(b.y() - o.y(), b.x() - o.x());
  const double d = core::wrap_angle(beta - alpha);
  return d >= 0 ? Sector{alpha, d} : Sector{beta, -d};
}

void cast_wall(BeamGrid& grid, const Eigen::Vector3d& origin, double yaw,
               const WallSegment& seg, double wall_height, double max_range) {
  const double ex = seg.b.x() - seg.a.x();
  const double ey = seg.b.y() - seg.a.y();
  const double wx = seg.a.x() - origin.x();
  const double wy = seg.a.y() - origin.y();
  const auto sector = sector_of_segment(origin.head<2>(), seg.a, seg.b);
  grid.for_sector(yaw, sector.lo, sector.lo + sector.width, [&](int az) {
    const double dx = grid.az_dx[az];
    const double dy = grid.az_dy[az];
    const double denom = dx * ey - dy * ex;
    if (std::abs(denom) < 1e-12) return;
    const double h = (wx * ey - wy * ex) / denom;   // horizontal distance
    const double t = (wx * dy - wy * dx) / denom;   // position along segment
    if (h <= 1e-9 || t < 0 || t > 1 || h >= max_range) return;
    for (int r = 0; r < grid.n_rings; ++r) {
      const double s = h / grid.cos_el[r];
      const std::size_t idx = grid.at(az, r);
      if (s >= grid.range[idx]) continue;
      const double z = origin.z() + h * grid.tan_el[r];
      if (z < 0 || z > wall_height) continue;
      grid.range[idx] = s;
      grid.surface[idx] = Surface::Wall;
    }
  });
}

void cast_marker(BeamGrid& grid, const Eigen::Vector3d& origin, double yaw,
                 const MarkerRect& m, double max_range) {
  const double nx = std::cos(m.normal_yaw);
  const double ny = std::sin(m.normal_yaw);
  const double tx = -ny, ty = nx;
  const double half_w = m.width / 2;
  const Eigen::Vector2d a(m.center.x() - tx * half_w, m.center.y() - ty * half_w);
  const Eigen::Vector2d b(m.center.x() + tx * half_w, m.center.y() + ty * half_w);
  const double num = (m.center.x() - origin.x()) * nx +
                     (m.center.y() - origin.y()) * ny;
  const double off0 = (origin.x() - m.center.x()) * tx +
                      (origin.y() - m.center.y()) * ty;
  const auto sector = sector_of_segment(origin.head<2>(), a, b);
  grid.for_sector(yaw, sector.lo, sector.lo + sector.width, [&](int az) {
    const double denom2d = grid.az_dx[az] * nx + grid.az_dy[az] * ny;
    if (std::abs(denom2d) < 1e-12) return;
    const double h = num / denom2d;  // horizontal distance to the plane
    if (h <= 1e-9 || h >= max_range) return;
    const double tangent = off0 + h * (grid.az_dx[az] * tx + grid.az_dy[az] * ty);
    if (std::abs(tangent) > half_w) return;
    for (int r = 0; r < grid.n_rings; ++r) {
      const double s = h / grid.cos_el[r];
      const std::size_t idx = grid.at(az, r);
      if (s >= grid.range[idx]) continue;
      const double z = origin.z() + h * grid.tan_el[r];
      if (std::abs(z - m.center.z()) > m.height / 2) continue;
      grid.range[idx] = s;
      grid.surface[idx] = Surface::Sign;
    }
  });
}

void cast_target(BeamGrid& grid, const Eigen::Vector3d& origin, double yaw,
                 const TargetState& target, const TargetModel& model,
                 double max_range) {
  const double rel_x = origin.x() - target.position.x();
  const double rel_y = origin.y() - target.position.y();
  const double dist2 = rel_x * rel_x + rel_y * rel_y;
  const double radius = model.body_radius_m;
  Sector sector;
  if (dist2 <= radius * radius) {
    sector = {-core::kPi, 2 * core::kPi};  // origin inside: all bins
  } else {
    const double center = std::atan2(-rel_y, -rel_x);
    const double half = std::asin(std::min(1.0, radius / std::sqrt(dist2)));
    sector = {center - half, 2 * half};
  }
  grid.for_sector(yaw, sector.lo, sector.lo + sector.width, [&](int az) {
    const double dx = grid.az_dx[az];
    const double dy = grid.az_dy[az];
    const double b = 2.0 * (dx * rel_x + dy * rel_y);
    const double c = dist2 - radius * radius;
    const double disc = b * b - 4 * c;
    if (disc < 0) return;
    const double sq = std::sqrt(disc);
    const double h1 = (-b - sq) / 2;
    const double h2 = (-b + sq) / 2;
    for (int r = 0; r < grid.n_rings; ++r) {
      for (double h : {h1, h2}) {
        if (h <= 1e-9 || h >= max_range) continue;
        const double s = h / grid.cos_el[r];
        const std::size_t idx = grid.at(az, r);
        if (s >= grid.range[idx]) break;
        const double z = origin.z() + h * grid.tan_el[r];
        if (z < 0 || z > model.body_height_m) continue;
        grid.range[idx] = s;
        grid.surface[idx] =
            on_stripe(z, model) ? Surface::Stripe : Surface::Body;
        break;  // nearer root wins
      }
    }
  });
}

}  // namespace

RaycastResult raycast_scan(const World& world,
                           const std::optional<TargetState>& target,
                           const TargetModel& target_model,
                           const core::Pose2D& robot, const SensorSim& sensors,
                           rng::Stream& noise, std::int64_t t_scan_start_us) {
  const LidarSimConfig& lid = sensors.lidar;
  RaycastResult rc;
  rc.scan.t_us = t_scan_start_us + lid.period_us();

  const Eigen::Vector3d origin(robot.x, robot.y, lid.mount_height_m);
  const double cos_yaw = std::cos(robot.yaw);
  const double sin_yaw = std::sin(robot.yaw);

  BeamGrid grid(lid, robot.yaw);
  for (const auto& wall : world.walls) {
    cast_wall(grid, origin, robot.yaw, wall, world.wall_height, lid.max_range_m);
  }
  for (const auto& marker : world.markers) {
    cast_marker(grid, origin, robot.yaw, marker, lid.max_range_m);
  }
  if (target) {
    cast_target(grid, origin, robot.yaw, *target, target_model, lid.max_range_m);
  }

  // Emit hits in firing order; noise draws follow the same order so a
  // fixed stream reproduces the same scan.
  for (int az = 0; az < lid.azimuth_bins; ++az) {
    for (int ring = 0; ring < lid.rings; ++ring) {
      const std::size_t idx = grid.at(az, ring);
      const double s = grid.range[idx];
      if (s >= lid.max_range_m) continue;  // miss

      const double dx = grid.cos_el[ring] * grid.az_dx[az];
      const double dy = grid.cos_el[ring] * grid.az_dy[az];
      const double dz = grid.sin_el[ring];
      const Eigen::Vector3d true_world = origin + s * Eigen::Vector3d(dx, dy, dz);
      double measured_range = s;
      if (lid.range_sigma_m > 0) {
        measured_range = std::max(0.001, s + noise.normal(0, lid.range_sigma_m));
      }
      const Eigen::Vector3d meas_world =
          origin + measured_range * Eigen::Vector3d(dx, dy, dz);

      const Surface surf = grid.surface[idx];
      const bool reflective = surf == Surface::Sign || surf == Surface::Stripe;
      const double mean = reflective ? lid.marker_intensity_mean
                                     : lid.wall_intensity_mean;
      const double sigma = reflective ? lid.marker_intensity_sigma
                                      : lid.wall_intensity_sigma;
      const double intensity = std::max(0.0, noise.normal(mean, sigma));

      auto to_lidar = [&](const Eigen::Vector3d& p) {
        const double rx = p.x() - origin.x();
        const double ry = p.y() - origin.y();
        return Eigen::Vector3d(cos_yaw * rx + sin_yaw * ry,
                               -sin_yaw * rx + cos_yaw * ry,
                               p.z() - origin.z());
      };

      lidar::LidarPoint point;
      const Eigen::Vector3d meas_l = to_lidar(meas_world);
      // Quantize to the CSV precision so live detection and a replay of
      // the written logs consume identical values.
      point.p = Eigen::Vector3d(csv::quantize_g9(meas_l.x()),
                                csv::quantize_g9(meas_l.y()),
                                csv::quantize_g9(meas_l.z()));
      point.intensity = csv::quantize_g9(intensity);
      rc.scan.points.push_back(point);

      RayHit hit;
      hit.surface = surf;
      hit.ring = ring;
      hit.az_bin = az;
      hit.world_pos = true_world;
      hit.lidar_pos = to_lidar(true_world);
      rc.hits.push_back(hit);
    }
  }
  return rc;
}

namespace {

void blinker_events(const BlinkerRect& blink, const EventSimConfig& cfg,
                    std::int64_t t0, std::int64_t t1,
                    std::vector<events::Event>& out) {
  if (blink.freq_hz <= 0) return;
  const auto period =
      static_cast<std::int64_t>(std::llround(1e6 / blink.freq_hz));
  if (period <= 0) return;
  for (int y = blink.y0; y < blink.y1; ++y) {
    for (int x = blink.x0; x < blink.x1; ++x) {
      // Stable per-pixel phase so each pixel blinks periodically.
      const std::int64_t phase = static_cast<std::int64_t>(
          rng::mix(static_cast<std::uint64_t>(x), static_cast<std::uint64_t>(y)) %
          static_cast<std::uint64_t>(period));
      std::int64_t t = ((t0 - phase + period - 1) / period) * period + phase;
      for (; t < t1; t += period) {
        out.push_back({t, static_cast<std::uint16_t>(x),
                       static_cast<std::uint16_t>(y), +1});
        out.push_back({t + cfg.pulse_width_us, static_cast<std::uint16_t>(x),
                       static_cast<std::uint16_t>(y), -1});
      }
    }
  }
}

}  // namespace

std::vector<events::Event> synthesize_events(const RaycastResult& rc,
                                             const SensorSim& sensors,
                                             std::int64_t t_scan_start_us,
                                             rng::Stream& noise,
                                             EventSynthState* state) {
  const LidarSimConfig& lid = sensors.lidar;
  const EventSimConfig& cfg = sensors.events;
  const std::int64_t period = lid.period_us();
  const std::int64_t t_end = t_scan_start_us + period;
  std::vector<events::Event> out;

  // Reflective hits visible in the camera frustum light the beam's pixel
  // footprint as the sweep passes. Candidates are deduplicated per pixel
  // with a refractory window, then each surviving pixel blinks: a positive
  // event at the firing time, a negative one pulse_width later.
  struct Candidate {
    std::int64_t t;
    std::uint16_t x, y;
  };
  std::vector<Candidate> candidates;
  const int spot = static_cast<int>(cfg.spot_radius_px);
  const double spot_r2 = cfg.spot_radius_px * cfg.spot_radius_px;
  for (const auto& hit : rc.hits) {
    if (hit.surface != Surface::Sign && hit.surface != Surface::Stripe) continue;
    const auto px =
        core::project_to_pixel(hit.lidar_pos, sensors.camera, sensors.extrinsics);
    if (!px) continue;
    const std::int64_t t_fire =
        t_scan_start_us + (static_cast<std::int64_t>(hit.az_bin) * period) /
                              lid.azimuth_bins;
    const int cu = static_cast<int>(px->u);
    const int cv = static_cast<int>(px->v);
    for (int dv = -spot; dv <= spot; ++dv) {
      for (int du = -spot; du <= spot; ++du) {
        if (du * du + dv * dv > spot_r2) continue;
        const int x = cu + du;
        const int y = cv + dv;
        if (x < 0 || y < 0 || x >= sensors.camera.width ||
            y >= sensors.camera.height) {
          continue;
        }
        candidates.push_back({t_fire, static_cast<std::uint16_t>(x),
                              static_cast<std::uint16_t>(y)});
      }
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              if (a.t != b.t) return a.t < b.t;
              if (a.y != b.y) return a.y < b.y;
              return a.x < b.x;
            });
  EventSynthState local;
  EventSynthState& mem = state ? *state : local;
  for (const auto& c : candidates) {
    const std::uint32_t key = (static_cast<std::uint32_t>(c.y) << 16) | c.x;
    const auto it = mem.last_emit_us.find(key);
    if (it != mem.last_emit_us.end() && c.t - it->second < cfg.refractory_us) {
      continue;
    }
    mem.last_emit_us[key] = c.t;
    out.push_back({c.t, c.x, c.y, +1});
    out.push_back({c.t + cfg.pulse_width_us, c.x, c.y, -1});
  }

  // Background noise: Poisson count over the interval, uniform in pixel
  // and time, random polarity.
  if (cfg.background_rate_hz_per_px > 0) {
    const double n_px =
        static_cast<double>(sensors.camera.width) * sensors.camera.height;
    const double lambda =
        cfg.background_rate_hz_per_px * n_px * (period * 1e-6);
    const std::int64_t count = noise.poisson(lambda);
    for (std::int64_t i = 0; i < count; ++i) {
      events::Event e;
      e.t_us = t_scan_start_us + static_cast<std::int64_t>(
                                     noise.integer(static_cast<std::uint64_t>(period)));
      e.x = static_cast<std::uint16_t>(noise.integer(sensors.camera.width));
      e.y = static_cast<std::uint16_t>(noise.integer(sensors.camera.height));
      e.polarity = noise.uniform() < 0.5 ? std::int8_t{1} : std::int8_t{-1};
      out.push_back(e);
    }
  }

  if (cfg.lamp.enabled) {
    const LampConfig& lamp = cfg.lamp;
    if (!lamp.periodic) {
      const std::int64_t count = noise.poisson(lamp.rate_hz * (period * 1e-6));
      for (std::int64_t i = 0; i < count; ++i) {
        const double r = lamp.radius_px * std::sqrt(noise.uniform());
        const double ang = noise.uniform(0, 2 * core::kPi);
        const int x = static_cast<int>(std::lround(lamp.center_u + r * std::cos(ang)));
        const int y = static_cast<int>(std::lround(lamp.center_v + r * std::sin(ang)));
        if (x < 0 || y < 0 || x >= sensors.camera.width || y >= sensors.camera.height)
          continue;
        events::Event e;
        e.t_us = t_scan_start_us + static_cast<std::int64_t>(
                                       noise.integer(static_cast<std::uint64_t>(period)));
        e.x = static_cast<std::uint16_t>(x);
        e.y = static_cast<std::uint16_t>(y);
        e.polarity = +1;
        out.push_back(e);
      }
    } else {
      // Adversarial mode: every pixel of the disc blinks in-band.
      BlinkerRect rect;
      rect.x0 = std::max(0, static_cast<int>(lamp.center_u - lamp.radius_px));
      rect.x1 = std::min(sensors.camera.width,
                         static_cast<int>(lamp.center_u + lamp.radius_px) + 1);
      rect.y0 = std::max(0, static_cast<int>(lamp.center_v - lamp.radius_px));
      rect.y1 = std::min(sensors.camera.height,
                         static_cast<int>(lamp.center_v + lamp.radius_px) + 1);
      rect.freq_hz = lamp.per_pixel_hz;
      std::vector<events::Event> disc;
      blinker_events(rect, cfg, t_scan_start_us, t_end, disc);
      for (const auto& e : disc) {
        const double du = e.x - lamp.center_u;
        const double dv = e.y - lamp.center_v;
        if (du * du + dv * dv <= lamp.radius_px * lamp.radius_px) {
          out.push_back(e);
        }
      }
    }
  }

  for (const auto& blink : cfg.blinkers) {
    blinker_events(blink, cfg, t_scan_start_us, t_end, out);
  }

  std::sort(out.begin(), out.end(), [](const events::Event& a,
                                       const events::Event& b) {
    if (a.t_us != b.t_us) return a.t_us < b.t_us;
    if (a.y != b.y) return a.y < b.y;
    if (a.x != b.x) return a.x < b.x;
    return a.polarity < b.polarity;
  });
  return out;
}

core::Pose2D step_robot(const core::Pose2D& pose, double v, double psi,
                        double dt) {
  if (!(dt > 0)) throw std::invalid_argument("step_robot: dt <= 0");
  core::Pose2D next;
  next.x = pose.x + dt * v * std::cos(pose.yaw);
  next.y = pose.y + dt * v * std::sin(pose.yaw);
  next.yaw = core::wrap_angle(pose.yaw + dt * psi);
  return next;
}

double segment_distance(const Eigen::Vector2d& p, const WallSegment& seg) {
  const Eigen::Vector2d e = seg.b - seg.a;
  const double len2 = e.squaredNorm();
  if (len2 < 1e-18) return (p - seg.a).norm();
  const double t = std::clamp((p - seg.a).dot(e) / len2, 0.0, 1.0);
  return (p - (seg.a + t * e)).norm();
}

}  // namespace subt_beacon::sim
