#pragma once

#include "subt_beacon/events.hpp"
#include "subt_beacon/fusion.hpp"
#include "subt_beacon/geometry.hpp"
#include "subt_beacon/lidar.hpp"
#include "subt_beacon/tracker.hpp"

#include <cstdint>
#include <string>

namespace subt_beacon::pipeline {

struct PipelineConfig {
  events::EventPipelineConfig events;
  double tau_intensity = 1000.0;
  lidar::KmeansParams kmeans;
  double theta_gate_rad = 0.15;
  // Per-scan k-means seed = mix(kmeans_seed_base, scan time), so an
  // offline replay of the logs reproduces the live clustering exactly.
  std::uint64_t kmeans_seed_base = 0x5eedb547;

  void validate() const;
};

/// The full detection path from raw streams to a classified frame. One
/// instance per stream; the same code runs live inside run_episode and
/// offline inside `replay`, which is what makes the two byte-identical.
class Detector {
 public:
  Detector(const core::CameraIntrinsics& intr, const PipelineConfig& cfg);

  /// Events must arrive in nondecreasing time order.
  void ingest(const events::Event& e);

  struct Tick {
    fusion::DetectionFrame frame;
    tracker::ScenarioMode mode = tracker::ScenarioMode::NoneDetect;
    fusion::TrackedFocus focus;
    std::vector<events::EventCluster> event_clusters;
    std::vector<lidar::LidarCluster> lidar_clusters;
  };

  /// Runs one detection tick against the scan: band filter at the scan's
  /// completion time, connectivity clustering, intensity filter, k-means
  /// with m = n + 1, bearing pairing, classification, track association.
  Tick process_scan(const lidar::LidarScan& scan);

  const events::FrequencyMap& frequency_map() const { return fmap_; }
  const PipelineConfig& config() const { return cfg_; }
  const core::CameraIntrinsics& intrinsics() const { return intr_; }

 private:
  core::CameraIntrinsics intr_;
  PipelineConfig cfg_;
  events::FrequencyMap fmap_;
  fusion::SingleTargetSelector selector_;
};

inline constexpr const char* kDetectionsHeader =
    "t_us,mode,x_l,y_l,z_l,theta_n,theta_m,pair_cost";

/// One detections-log row per tick, carrying the tracked focus.
std::string detection_csv_row(const Detector::Tick& tick, std::int64_t t_us);

}  // namespace subt_beacon::pipeline
