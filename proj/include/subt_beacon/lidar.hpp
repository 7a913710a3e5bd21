#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace subt_beacon::lidar {

struct LidarPoint {
  Eigen::Vector3d p{0, 0, 0};  // meters, LiDAR frame
  double intensity = 0;
};

/// One full revolution of returns; t_us is the scan completion time.
struct LidarScan {
  std::int64_t t_us = 0;
  std::vector<LidarPoint> points;
};

struct LidarCluster {
  std::vector<LidarPoint> points;
  Eigen::Vector3d centroid{0, 0, 0};  // mean of member points
};

/// Exactly the points with intensity >= tau, order preserved.
std::vector<LidarPoint> intensity_filter(const LidarScan& scan, double tau);

/// Cluster count for the point cloud given n event-camera clusters: one
/// extra cluster so an object that left the camera's field of view still
/// gets its own cluster.
int select_m(int n);

struct KmeansParams {
  double tol_m = 1e-4;   // centroid shift below this stops Lloyd iterations
  int max_iters = 100;
  int min_cluster_pts = 3;
};

/// K-means on (x, y, z) with k = min(m, |points|), k-means++ seeding from
/// `seed`, Lloyd iterations to convergence. Clusters smaller than
/// min_cluster_pts are dropped; output is sorted by centroid. Empty input
/// yields empty output. `wcss_trace`, when given, receives the total
/// within-cluster sum of squares after each assignment step.
std::vector<LidarCluster> kmeans_cluster(const std::vector<LidarPoint>& points,
                                         int m, std::uint64_t seed,
                                         const KmeansParams& params = {},
                                         std::vector<double>* wcss_trace = nullptr);

}  // namespace subt_beacon::lidar
