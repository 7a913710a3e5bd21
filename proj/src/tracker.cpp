#include "subt_beacon/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace subt_beacon::tracker {

const char* to_string(ScenarioMode mode) {
  switch (mode) {
    case ScenarioMode::BothDetect: return "both_detect";
    case ScenarioMode::EventOnly: return "event_only";
    case ScenarioMode::LidarOnly: return "lidar_only";
    case ScenarioMode::NoneDetect: return "none_detect";
  }
  return "unknown";
}

ScenarioMode classify_scenario(const fusion::DetectionFrame& frame) {
  if (!frame.pairs.empty()) return ScenarioMode::BothDetect;
  if (!frame.unpaired_event_centroids.empty()) return ScenarioMode::EventOnly;
  if (!frame.unpaired_lidar_centroids.empty()) return ScenarioMode::LidarOnly;
  return ScenarioMode::NoneDetect;
}

void NmpcConfig::validate() const {
  if (horizon < 1) throw std::invalid_argument("nmpc: horizon < 1");
  if (!(dt > 0)) throw std::invalid_argument("nmpc: dt <= 0");
  if (!(v_min < v_max)) throw std::invalid_argument("nmpc: v bounds inverted");
  if (!(psi_min < psi_max)) throw std::invalid_argument("nmpc: psi bounds inverted");
  for (double w : {q_p, q_yaw, r_v, r_psi, q_terminal, w_c}) {
    if (w < 0) throw std::invalid_argument("nmpc: negative weight");
  }
  if (!(d_safe >= 0) || !(r_nom > 0)) {
    throw std::invalid_argument("nmpc: bad distance parameter");
  }
  if (max_iters < 1) throw std::invalid_argument("nmpc: max_iters < 1");
}

TrackingReference make_reference(ScenarioMode mode,
                                 const fusion::TrackedFocus& focus,
                                 const core::Pose2D& robot,
                                 const core::Extrinsics& ext,
                                 const NmpcConfig& cfg) {
  TrackingReference ref;
  ref.mode = mode;
  ref.x_ref = robot.x;
  ref.y_ref = robot.y;
  ref.yaw_ref = robot.yaw;

  // A focus can come back empty in degenerate frames (e.g. every LiDAR
  // centroid on the sensor axis); hold position then.
  if ((mode == ScenarioMode::BothDetect && !focus.pair) ||
      (mode == ScenarioMode::EventOnly && !focus.event_bearing) ||
      (mode == ScenarioMode::LidarOnly && !focus.lidar_centroid)) {
    return ref;
  }

  switch (mode) {
    case ScenarioMode::BothDetect: {
      const Eigen::Vector2d target =
          core::lidar_to_world(focus.pair->lidar_point, robot, ext);
      ref.target_world = target;
      const Eigen::Vector2d away = Eigen::Vector2d(robot.x, robot.y) - target;
      const double dist = away.norm();
      if (dist > 1e-9) {
        const Eigen::Vector2d anchor = target + cfg.d_safe * (away / dist);
        ref.x_ref = anchor.x();
        ref.y_ref = anchor.y();
        ref.yaw_ref = std::atan2(target.y() - anchor.y(), target.x() - anchor.x());
      }
      break;
    }
    case ScenarioMode::EventOnly: {
      const double heading = core::wrap_angle(robot.yaw + *focus.event_bearing);
      ref.x_ref = robot.x + cfg.r_nom * std::cos(heading);
      ref.y_ref = robot.y + cfg.r_nom * std::sin(heading);
      ref.yaw_ref = heading;
      break;
    }
    case ScenarioMode::LidarOnly: {
      const Eigen::Vector3d& c = *focus.lidar_centroid;
      const double range = c.head<2>().norm();
      const double theta = core::lidar_bearing(c.x(), c.y()).theta;
      const double heading = core::wrap_angle(robot.yaw + theta);
      const double advance = std::max(0.0, std::min(range, cfg.r_nom) - cfg.d_safe);
      ref.x_ref = robot.x + advance * std::cos(heading);
      ref.y_ref = robot.y + advance * std::sin(heading);
      ref.yaw_ref = heading;
      ref.target_world = core::lidar_to_world(c, robot, ext);
      break;
    }
    case ScenarioMode::NoneDetect:
      break;  // hold current pose
  }
  return ref;
}

Eigen::Matrix3Xd nmpc_rollout(const core::Pose2D& state,
                              const Eigen::Matrix2Xd& controls,
                              const NmpcConfig& cfg) {
  const int n = static_cast<int>(controls.cols());
  Eigen::Matrix3Xd traj(3, n + 1);
  traj.col(0) = Eigen::Vector3d(state.x, state.y, state.yaw);
  for (int k = 0; k < n; ++k) {
    const double v = controls(0, k);
    const double psi = controls(1, k);
    const double yaw = traj(2, k);
    traj(0, k + 1) = traj(0, k) + cfg.dt * v * std::cos(yaw);
    traj(1, k + 1) = traj(1, k) + cfg.dt * v * std::sin(yaw);
    traj(2, k + 1) = traj(2, k) + cfg.dt * psi;
  }
  return traj;
}

namespace {

/// Stage cost pieces evaluated on the successor state of each step; the
/// terminal state additionally carries q_terminal on position.
double state_cost(const Eigen::Vector3d& s, const TrackingReference& ref,
                  const NmpcConfig& cfg, bool terminal) {
  const Eigen::Vector2d p(s.x(), s.y());
  const Eigen::Vector2d p_ref(ref.x_ref, ref.y_ref);
  double c = cfg.q_p * (p - p_ref).squaredNorm();
  const double yaw_err = core::wrap_angle(s.z() - ref.yaw_ref);
  c += cfg.q_yaw * yaw_err * yaw_err;
  if (ref.target_world) {
    const double d = (p - *ref.target_world).norm();
    const double viol = std::max(0.0, cfg.d_safe - d);
    c += cfg.w_c * viol * viol;
  }
  if (terminal) c += cfg.q_terminal * (p - p_ref).squaredNorm();
  return c;
}

Eigen::Vector3d state_cost_gradient(const Eigen::Vector3d& s,
                                    const TrackingReference& ref,
                                    const NmpcConfig& cfg, bool terminal) {
  const Eigen::Vector2d p(s.x(), s.y());
  const Eigen::Vector2d p_ref(ref.x_ref, ref.y_ref);
  Eigen::Vector2d gp = 2.0 * cfg.q_p * (p - p_ref);
  if (terminal) gp += 2.0 * cfg.q_terminal * (p - p_ref);
  if (ref.target_world) {
    const Eigen::Vector2d dp = p - *ref.target_world;
    const double d = dp.norm();
    const double viol = cfg.d_safe - d;
    if (viol > 0 && d > 1e-9) {
      gp += 2.0 * cfg.w_c * viol * (-dp / d);
    }
  }
  const double yaw_err = core::wrap_angle(s.z() - ref.yaw_ref);
  return Eigen::Vector3d(gp.x(), gp.y(), 2.0 * cfg.q_yaw * yaw_err);
}

void check_problem(const core::Pose2D& state, const TrackingReference& ref) {
  if (!state.finite() || !std::isfinite(ref.x_ref) || !std::isfinite(ref.y_ref) ||
      !std::isfinite(ref.yaw_ref)) {
    throw std::invalid_argument("nmpc: non-finite state or reference");
  }
}

Eigen::Matrix2Xd project(Eigen::Matrix2Xd u, const NmpcConfig& cfg) {
  for (int k = 0; k < u.cols(); ++k) {
    u(0, k) = std::clamp(u(0, k), cfg.v_min, cfg.v_max);
    u(1, k) = std::clamp(u(1, k), cfg.psi_min, cfg.psi_max);
  }
  return u;
}

}  // namespace

double nmpc_cost(const core::Pose2D& state, const TrackingReference& ref,
                 const Eigen::Matrix2Xd& controls, const NmpcConfig& cfg) {
  check_problem(state, ref);
  const int n = static_cast<int>(controls.cols());
  const Eigen::Matrix3Xd traj = nmpc_rollout(state, controls, cfg);
  double cost = 0;
  for (int k = 0; k < n; ++k) {
    cost += state_cost(traj.col(k + 1), ref, cfg, k + 1 == n);
    cost += cfg.r_v * controls(0, k) * controls(0, k);
    cost += cfg.r_psi * controls(1, k) * controls(1, k);
  }
  return cost;
}

Eigen::Matrix2Xd nmpc_gradient(const core::Pose2D& state,
                               const TrackingReference& ref,
                               const Eigen::Matrix2Xd& controls,
                               const NmpcConfig& cfg) {
  check_problem(state, ref);
  const int n = static_cast<int>(controls.cols());
  const Eigen::Matrix3Xd traj = nmpc_rollout(state, controls, cfg);

  Eigen::Matrix2Xd grad(2, n);
  // Backward adjoint pass: lambda accumulates d(cost of states k+1..n)/dx_k.
  Eigen::Vector3d lambda = Eigen::Vector3d::Zero();
  for (int k = n - 1; k >= 0; --k) {
    lambda += state_cost_gradient(traj.col(k + 1), ref, cfg, k + 1 == n);

    const double v = controls(0, k);
    const double yaw = traj(2, k);
    const double sin_yaw = std::sin(yaw);
    const double cos_yaw = std::cos(yaw);

    grad(0, k) = 2.0 * cfg.r_v * v +
                 cfg.dt * (cos_yaw * lambda.x() + sin_yaw * lambda.y());
    grad(1, k) = 2.0 * cfg.r_psi * controls(1, k) + cfg.dt * lambda.z();

    // Pull lambda through the dynamics Jacobian to the previous state.
    const double dyaw =
        lambda.z() + cfg.dt * v * (-sin_yaw * lambda.x() + cos_yaw * lambda.y());
    lambda.z() = dyaw;
  }
  return grad;
}

NmpcSolution nmpc_solve(const core::Pose2D& state, const TrackingReference& ref,
                        const NmpcSolution* warm, const NmpcConfig& cfg) {
  cfg.validate();
  check_problem(state, ref);
  const int n = cfg.horizon;

  struct Descent {
    Eigen::Matrix2Xd u;
    double cost;
    int iterations;
    std::vector<double> trace;
  };

  auto descend = [&](Eigen::Matrix2Xd u) -> Descent {
    u = project(std::move(u), cfg);
    Descent d{u, nmpc_cost(state, ref, u, cfg), 0, {}};
    d.trace.push_back(d.cost);
    double alpha = 1.0;
    for (int iter = 0; iter < cfg.max_iters; ++iter) {
      d.iterations = iter + 1;
      const Eigen::Matrix2Xd g = nmpc_gradient(state, ref, d.u, cfg);
      // Projected-gradient stationarity measure.
      const Eigen::Matrix2Xd pg = d.u - project(d.u - g, cfg);
      if (pg.cwiseAbs().maxCoeff() < cfg.grad_tol) break;

      bool accepted = false;
      double a = alpha;
      for (int bt = 0; bt < 40; ++bt) {
        const Eigen::Matrix2Xd u_new = project(d.u - a * g, cfg);
        const double decrease = (g.array() * (d.u - u_new).array()).sum();
        const double cost_new = nmpc_cost(state, ref, u_new, cfg);
        if (cost_new <= d.cost - 1e-4 * decrease && cost_new < d.cost) {
          d.u = u_new;
          d.cost = cost_new;
          d.trace.push_back(cost_new);
          alpha = std::min(a * 2.0, 8.0);
          accepted = true;
          break;
        }
        a *= 0.5;
      }
      if (!accepted) break;  // no further descent direction at this scale
    }
    return d;
  };

  Descent best = descend(Eigen::Matrix2Xd::Zero(2, n));
  if (warm && warm->controls.cols() == n) {
    Eigen::Matrix2Xd shifted(2, n);
    shifted.leftCols(n - 1) = warm->controls.rightCols(n - 1);
    shifted.col(n - 1) = warm->controls.col(n - 1);
    Descent warm_result = descend(std::move(shifted));
    if (warm_result.cost < best.cost) best = std::move(warm_result);
  }

  NmpcSolution sol;
  sol.controls = best.u;
  sol.trajectory = nmpc_rollout(state, best.u, cfg);
  sol.cost = best.cost;
  sol.iterations = best.iterations;
  sol.cost_trace = std::move(best.trace);
  return sol;
}

}  // namespace subt_beacon::tracker
