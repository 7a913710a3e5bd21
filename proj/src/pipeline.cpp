#include "subt_beacon/pipeline.hpp"

#include "subt_beacon/csv.hpp"
#include "subt_beacon/rng.hpp"

#include <limits>
#include <stdexcept>

namespace subt_beacon::pipeline {

void PipelineConfig::validate() const {
  events.validate();
  if (!(tau_intensity > 0)) {
    throw std::invalid_argument("pipeline: tau_intensity <= 0");
  }
  if (!(theta_gate_rad > 0)) {
    throw std::invalid_argument("pipeline: theta_gate <= 0");
  }
  if (kmeans.min_cluster_pts < 1) {
    throw std::invalid_argument("pipeline: min_cluster_pts < 1");
  }
}

Detector::Detector(const core::CameraIntrinsics& intr, const PipelineConfig& cfg)
    : intr_(intr), cfg_(cfg), fmap_(intr.width, intr.height) {
  intr_.validate();
  cfg_.validate();
}

void Detector::ingest(const events::Event& e) { fmap_.update(e, cfg_.events); }

Detector::Tick Detector::process_scan(const lidar::LidarScan& scan) {
  Tick tick;
  const auto passing = fmap_.band_filter(cfg_.events.band_lo_hz,
                                         cfg_.events.band_hi_hz, scan.t_us);
  tick.event_clusters = events::cluster_pixels(passing, cfg_.events.eps_f_hz,
                                               cfg_.events.min_cluster_px);
  const auto n_centroids = events::cluster_centroids(tick.event_clusters);

  const auto bright = lidar::intensity_filter(scan, cfg_.tau_intensity);
  if (!bright.empty()) {
    const int m = lidar::select_m(static_cast<int>(n_centroids.size()));
    const std::uint64_t seed =
        rng::mix(cfg_.kmeans_seed_base, static_cast<std::uint64_t>(scan.t_us));
    tick.lidar_clusters = lidar::kmeans_cluster(bright, m, seed, cfg_.kmeans);
  }
  std::vector<Eigen::Vector3d> m_centroids;
  m_centroids.reserve(tick.lidar_clusters.size());
  for (const auto& c : tick.lidar_clusters) m_centroids.push_back(c.centroid);

  tick.frame = fusion::pair_clusters(n_centroids, intr_, m_centroids,
                                     cfg_.theta_gate_rad, scan.t_us);
  tick.mode = tracker::classify_scenario(tick.frame);
  tick.focus = selector_.select(tick.frame, intr_);
  return tick;
}

std::string detection_csv_row(const Detector::Tick& tick, std::int64_t t_us) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  double x = nan, y = nan, z = nan, theta_n = nan, theta_m = nan, cost = nan;
  if (tick.focus.pair) {
    const auto& p = *tick.focus.pair;
    x = p.lidar_point.x();
    y = p.lidar_point.y();
    z = p.lidar_point.z();
    theta_n = p.theta_n;
    theta_m = p.theta_m;
    cost = p.pair_cost;
  } else if (tick.focus.event_bearing) {
    theta_n = *tick.focus.event_bearing;
  } else if (tick.focus.lidar_centroid) {
    const auto& c = *tick.focus.lidar_centroid;
    x = c.x();
    y = c.y();
    z = c.z();
    theta_m = core::lidar_bearing(c.x(), c.y()).theta;
  }
  std::string row = std::to_string(t_us);
  row += ',';
  row += tracker::to_string(tick.mode);
  for (double v : {x, y, z, theta_n, theta_m, cost}) {
    row += ',';
    row += csv::format_g9(v);
  }
  return row;
}

}  // namespace subt_beacon::pipeline
