#include "subt_beacon/lidar.hpp"

#include "subt_beacon/rng.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace subt_beacon::lidar {

std::vector<LidarPoint> intensity_filter(const LidarScan& scan, double tau) {
  if (!(tau > 0)) throw std::invalid_argument("intensity_filter: tau <= 0");
  std::vector<LidarPoint> out;
  for (const auto& pt : scan.points) {
    if (pt.intensity >= tau) out.push_back(pt);
  }
  return out;
}

int select_m(int n) {
  if (n < 0) throw std::invalid_argument("select_m: negative cluster count");
  return n + 1;
}

namespace {

std::size_t nearest_center(const Eigen::Vector3d& p,
                           const std::vector<Eigen::Vector3d>& centers) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centers.size(); ++j) {
    const double d = (p - centers[j]).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

std::vector<Eigen::Vector3d> kmeanspp_seed(
    const std::vector<Eigen::Vector3d>& pts, std::size_t k,
    rng::Stream& stream) {
  std::vector<Eigen::Vector3d> centers;
  centers.reserve(k);
  centers.push_back(pts[stream.integer(pts.size())]);
  std::vector<double> d2(pts.size());
  while (centers.size() < k) {
    double total = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      d2[i] = (pts[i] - centers[nearest_center(pts[i], centers)]).squaredNorm();
      total += d2[i];
    }
    if (total <= 0) {
      // All remaining points coincide with a chosen center.
      centers.push_back(pts[stream.integer(pts.size())]);
      continue;
    }
    double r = stream.uniform() * total;
    std::size_t pick = pts.size() - 1;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      r -= d2[i];
      if (r <= 0) {
        pick = i;
        break;
      }
    }
    centers.push_back(pts[pick]);
  }
  return centers;
}

}  // namespace

std::vector<LidarCluster> kmeans_cluster(const std::vector<LidarPoint>& points,
                                         int m, std::uint64_t seed,
                                         const KmeansParams& params,
                                         std::vector<double>* wcss_trace) {
  if (m <= 0) throw std::invalid_argument("kmeans_cluster: m <= 0");
  if (points.empty()) return {};

  std::vector<Eigen::Vector3d> pts;
  pts.reserve(points.size());
  for (const auto& pt : points) pts.push_back(pt.p);

  const std::size_t k = std::min<std::size_t>(m, pts.size());
  rng::Stream stream(seed);
  std::vector<Eigen::Vector3d> centers = kmeanspp_seed(pts, k, stream);

  std::vector<std::size_t> assign(pts.size(), 0);
  for (int iter = 0; iter < params.max_iters; ++iter) {
    double wcss = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      assign[i] = nearest_center(pts[i], centers);
      wcss += (pts[i] - centers[assign[i]]).squaredNorm();
    }
    if (wcss_trace) wcss_trace->push_back(wcss);

    std::vector<Eigen::Vector3d> sums(k, Eigen::Vector3d::Zero());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      sums[assign[i]] += pts[i];
      ++counts[assign[i]];
    }
    double shift = 0;
    for (std::size_t j = 0; j < k; ++j) {
      Eigen::Vector3d next;
      if (counts[j] > 0) {
        next = sums[j] / static_cast<double>(counts[j]);
      } else {
        // Relocate an empty cluster to the point farthest from its center.
        std::size_t far_i = 0;
        double far_d = -1;
        for (std::size_t i = 0; i < pts.size(); ++i) {
          const double d = (pts[i] - centers[assign[i]]).squaredNorm();
          if (d > far_d) {
            far_d = d;
            far_i = i;
          }
        }
        next = pts[far_i];
      }
      shift = std::max(shift, (next - centers[j]).norm());
      centers[j] = next;
    }
    if (shift < params.tol_m) break;
  }

  // Final assignment against the converged centers.
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    members[nearest_center(pts[i], centers)].push_back(i);
  }

  std::vector<LidarCluster> out;
  for (std::size_t j = 0; j < k; ++j) {
    if (static_cast<int>(members[j].size()) < params.min_cluster_pts) continue;
    LidarCluster cluster;
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    for (std::size_t i : members[j]) {
      cluster.points.push_back(points[i]);
      sum += pts[i];
    }
    cluster.centroid = sum / static_cast<double>(cluster.points.size());
    out.push_back(std::move(cluster));
  }
  std::sort(out.begin(), out.end(), [](const LidarCluster& a,
                                       const LidarCluster& b) {
    return std::lexicographical_compare(a.centroid.data(), a.centroid.data() + 3,
                                        b.centroid.data(), b.centroid.data() + 3);
  });
  return out;
}

}  // namespace subt_beacon::lidar
