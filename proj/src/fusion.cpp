#include "subt_beacon/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace subt_beacon::fusion {

Assignment solve_assignment(const Eigen::MatrixXd& cost) {
  const int rows = static_cast<int>(cost.rows());
  const int cols = static_cast<int>(cost.cols());
  if (rows > cols) {
    throw std::invalid_argument(
        "solve_assignment: more rows than columns, no injection exists");
  }
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      if (!std::isfinite(cost(i, j)) || cost(i, j) < 0) {
        throw std::invalid_argument("solve_assignment: costs must be finite and >= 0");
      }
    }
  }
  Assignment result;
  result.col_of_row.assign(rows, -1);
  if (rows == 0 || cols == 0) return result;

  // Potentials formulation over the square matrix; rows beyond `rows` are
  // zero-cost dummies absorbing the surplus columns.
  const int n = cols;
  auto c = [&](int i, int j) { return i < rows ? cost(i, j) : 0.0; };

  std::vector<double> u(n + 1, 0), v(n + 1, 0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), std::numeric_limits<double>::infinity());
    std::vector<char> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      int j1 = 0;
      double delta = std::numeric_limits<double>::infinity();
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = c(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }

  for (int j = 1; j <= n; ++j) {
    const int i = p[j] - 1;
    if (i >= 0 && i < rows) {
      result.col_of_row[i] = j - 1;
      result.total_cost += cost(i, j - 1);
    }
  }
  return result;
}

BearingPairing pair_by_bearing(const std::vector<double>& theta_n,
                               const std::vector<double>& theta_m,
                               double theta_gate) {
  BearingPairing out;
  out.m_of_n.assign(theta_n.size(), -1);
  if (theta_n.empty() || theta_m.empty()) return out;

  const bool transposed = theta_n.size() > theta_m.size();
  const auto& small = transposed ? theta_m : theta_n;
  const auto& large = transposed ? theta_n : theta_m;
  Eigen::MatrixXd cost(small.size(), large.size());
  for (std::size_t i = 0; i < small.size(); ++i) {
    for (std::size_t j = 0; j < large.size(); ++j) {
      cost(i, j) = std::abs(core::wrap_angle(small[i] - large[j]));
    }
  }
  const Assignment assignment = solve_assignment(cost);
  for (std::size_t i = 0; i < small.size(); ++i) {
    const int j = assignment.col_of_row[i];
    if (j < 0) continue;
    const double pair_cost = cost(i, j);
    if (pair_cost > theta_gate) continue;
    if (transposed) {
      out.m_of_n[j] = static_cast<int>(i);
    } else {
      out.m_of_n[i] = j;
    }
    out.total_cost += pair_cost;
  }
  return out;
}

DetectionFrame pair_clusters(const std::vector<Eigen::Vector2d>& event_centroids,
                             const core::CameraIntrinsics& intr,
                             const std::vector<Eigen::Vector3d>& lidar_centroids,
                             double theta_gate, std::int64_t t_us) {
  DetectionFrame frame;
  frame.t_us = t_us;

  std::vector<double> theta_n;
  theta_n.reserve(event_centroids.size());
  for (const auto& c : event_centroids) {
    theta_n.push_back(core::pixel_bearing(c.x(), c.y(), intr).theta);
  }

  // LiDAR centroids sitting on the sensor axis have no azimuth; they can
  // never pair and go straight to the unpaired list.
  std::vector<double> theta_m;
  std::vector<std::size_t> m_index;
  for (std::size_t j = 0; j < lidar_centroids.size(); ++j) {
    const auto& c = lidar_centroids[j];
    if (c.head<2>().norm() < 1e-12) {
      frame.unpaired_lidar_centroids.push_back(c);
      continue;
    }
    theta_m.push_back(core::lidar_bearing(c.x(), c.y()).theta);
    m_index.push_back(j);
  }

  const BearingPairing pairing = pair_by_bearing(theta_n, theta_m, theta_gate);

  std::vector<char> m_used(theta_m.size(), 0);
  for (std::size_t i = 0; i < theta_n.size(); ++i) {
    const int j = pairing.m_of_n[i];
    if (j < 0) {
      frame.unpaired_event_centroids.push_back(event_centroids[i]);
      continue;
    }
    m_used[j] = 1;
    PairedDetection det;
    det.image_centroid = event_centroids[i];
    det.lidar_point = lidar_centroids[m_index[j]];
    det.theta_n = theta_n[i];
    det.theta_m = theta_m[j];
    det.pair_cost = std::abs(core::wrap_angle(det.theta_n - det.theta_m));
    frame.pairs.push_back(det);
  }
  for (std::size_t j = 0; j < theta_m.size(); ++j) {
    if (!m_used[j]) {
      frame.unpaired_lidar_centroids.push_back(lidar_centroids[m_index[j]]);
    }
  }
  return frame;
}

namespace {

double bearing_distance(double theta, const std::optional<double>& last) {
  return last ? std::abs(core::wrap_angle(theta - *last)) : std::abs(theta);
}

}  // namespace

TrackedFocus SingleTargetSelector::select(const DetectionFrame& frame,
                                          const core::CameraIntrinsics& intr) {
  TrackedFocus focus;
  if (!frame.pairs.empty()) {
    const PairedDetection* best = nullptr;
    double best_key = std::numeric_limits<double>::infinity();
    double best_range = std::numeric_limits<double>::infinity();
    for (const auto& pair : frame.pairs) {
      const double range = pair.lidar_point.head<2>().norm();
      const double key = last_bearing_
                             ? std::abs(core::wrap_angle(pair.theta_m - *last_bearing_))
                             : range;
      if (key < best_key || (key == best_key && range < best_range)) {
        best_key = key;
        best_range = range;
        best = &pair;
      }
    }
    focus.pair = *best;
    last_bearing_ = best->theta_m;
  } else if (!frame.unpaired_event_centroids.empty()) {
    double best_theta = 0;
    double best_key = std::numeric_limits<double>::infinity();
    for (const auto& c : frame.unpaired_event_centroids) {
      const double theta = core::pixel_bearing(c.x(), c.y(), intr).theta;
      const double key = bearing_distance(theta, last_bearing_);
      if (key < best_key) {
        best_key = key;
        best_theta = theta;
      }
    }
    focus.event_bearing = best_theta;
    last_bearing_ = best_theta;
  } else if (!frame.unpaired_lidar_centroids.empty()) {
    const Eigen::Vector3d* best = nullptr;
    double best_key = std::numeric_limits<double>::infinity();
    double best_range = std::numeric_limits<double>::infinity();
    for (const auto& c : frame.unpaired_lidar_centroids) {
      const double range = c.head<2>().norm();
      if (range < 1e-12) continue;
      const double theta = core::lidar_bearing(c.x(), c.y()).theta;
      const double key = last_bearing_ ? bearing_distance(theta, last_bearing_)
                                       : range;
      if (key < best_key || (key == best_key && range < best_range)) {
        best_key = key;
        best_range = range;
        best = &c;
      }
    }
    if (best) {
      focus.lidar_centroid = *best;
      last_bearing_ = core::lidar_bearing(best->x(), best->y()).theta;
    }
  }
  return focus;
}

}  // namespace subt_beacon::fusion
