#pragma once

#include "subt_beacon/geometry.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace subt_beacon::fusion {

/// Matched (image centroid, 3D centroid) pair with bearings.
struct PairedDetection {
  Eigen::Vector2d image_centroid{0, 0};      // px
  Eigen::Vector3d lidar_point{0, 0, 0};      // m, LiDAR frame
  double theta_n = 0;                        // camera bearing, rad
  double theta_m = 0;                        // LiDAR bearing, rad
  double pair_cost = 0;                      // |wrap(theta_n - theta_m)|
};

/// One detection tick. Every input centroid appears in exactly one of
/// pairs / unpaired lists.
struct DetectionFrame {
  std::int64_t t_us = 0;
  std::vector<PairedDetection> pairs;
  std::vector<Eigen::Vector2d> unpaired_event_centroids;
  std::vector<Eigen::Vector3d> unpaired_lidar_centroids;
};

struct Assignment {
  std::vector<int> col_of_row;
  double total_cost = 0;
};

/// Optimal injective assignment of rows into columns minimizing total
/// cost (Kuhn-Munkres on the square matrix padded with zero-cost dummy
/// rows). Requires rows <= cols and finite, nonnegative costs.
Assignment solve_assignment(const Eigen::MatrixXd& cost);

/// Assignment on bearings alone: pairs index i of theta_n with a distinct
/// index of theta_m minimizing the summed wrapped angle differences, then
/// rejects pairs whose difference exceeds theta_gate. Returns per-N column
/// (-1 = unpaired) plus each accepted pair's cost.
struct BearingPairing {
  std::vector<int> m_of_n;  // -1 where gated out or unmatched
  double total_cost = 0;
};
BearingPairing pair_by_bearing(const std::vector<double>& theta_n,
                               const std::vector<double>& theta_m,
                               double theta_gate);

/// Full pairing step: camera bearings via pixel_bearing, LiDAR bearings
/// via lidar_bearing, optimal assignment, and gating.
DetectionFrame pair_clusters(const std::vector<Eigen::Vector2d>& event_centroids,
                             const core::CameraIntrinsics& intr,
                             const std::vector<Eigen::Vector3d>& lidar_centroids,
                             double theta_gate, std::int64_t t_us);

/// What the single-target tracker keeps its eye on this tick. At most one
/// member is engaged: a full pair when one exists, otherwise a bare camera
/// bearing, otherwise a bare LiDAR centroid.
struct TrackedFocus {
  std::optional<PairedDetection> pair;
  std::optional<double> event_bearing;
  std::optional<Eigen::Vector3d> lidar_centroid;
};

/// Nearest-neighbor data association across ticks for the single-target
/// mode: picks the detection nearest in bearing to the previously tracked
/// bearing, ties broken by smaller range; on first acquisition, smallest
/// range (pairs / LiDAR) or smallest absolute bearing (camera-only).
class SingleTargetSelector {
 public:
  TrackedFocus select(const DetectionFrame& frame,
                      const core::CameraIntrinsics& intr);
  void reset() { last_bearing_.reset(); }
  std::optional<double> last_bearing() const { return last_bearing_; }

 private:
  std::optional<double> last_bearing_;
};

}  // namespace subt_beacon::fusion
