#pragma once

#include "subt_beacon/fusion.hpp"
#include "subt_beacon/geometry.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace subt_beacon::tracker {

enum class ScenarioMode { BothDetect, EventOnly, LidarOnly, NoneDetect };

const char* to_string(ScenarioMode mode);

/// Which of the four detection scenarios the frame falls into. Total and
/// exclusive: exactly one mode per frame.
ScenarioMode classify_scenario(const fusion::DetectionFrame& frame);

struct NmpcConfig {
  int horizon = 20;
  double dt = 0.1;  // s
  double v_min = -0.3, v_max = 1.0;      // m/s
  double psi_min = -1.0, psi_max = 1.0;  // rad/s
  double q_p = 4.0;        // position tracking weight
  double q_yaw = 1.0;      // heading tracking weight
  double r_v = 0.5;        // linear velocity effort
  double r_psi = 0.5;      // angular velocity effort
  double q_terminal = 8.0; // extra terminal position weight
  double w_c = 50.0;       // standoff soft-constraint weight
  double d_safe = 1.5;     // m, standoff distance to the tracked human
  double r_nom = 3.0;      // m, nominal advance for bearing-only references
  int max_iters = 50;
  double grad_tol = 1e-6;

  void validate() const;
};

struct TrackingReference {
  double x_ref = 0, y_ref = 0;
  double yaw_ref = 0;
  ScenarioMode mode = ScenarioMode::NoneDetect;
  std::optional<Eigen::Vector2d> target_world;  // detected human, world frame
};

/// Builds the NMPC reference for the active scenario. With a full pair the
/// reference sits exactly d_safe from the fused target along the
/// target-to-robot ray, facing the target. Camera-only places it r_nom out
/// along the bearing; LiDAR-only advances to the centroid's range (capped
/// at r_nom) minus the standoff; no detection holds the current pose.
TrackingReference make_reference(ScenarioMode mode,
                                 const fusion::TrackedFocus& focus,
                                 const core::Pose2D& robot,
                                 const core::Extrinsics& ext,
                                 const NmpcConfig& cfg);

struct NmpcSolution {
  Eigen::Matrix2Xd controls;     // row 0 = v, row 1 = psi, one column per step
  Eigen::Matrix3Xd trajectory;   // predicted (x, y, yaw), horizon+1 columns
  double cost = 0;
  int iterations = 0;
  std::vector<double> cost_trace;  // cost after each accepted step
};

/// Horizon cost of a control sequence from `state` toward `ref`.
double nmpc_cost(const core::Pose2D& state, const TrackingReference& ref,
                 const Eigen::Matrix2Xd& controls, const NmpcConfig& cfg);

/// Unicycle rollout of the control sequence (Euler, cfg.dt per step).
Eigen::Matrix3Xd nmpc_rollout(const core::Pose2D& state,
                              const Eigen::Matrix2Xd& controls,
                              const NmpcConfig& cfg);

/// Analytic gradient of the horizon cost w.r.t. the controls (adjoint
/// recursion); matches central finite differences.
Eigen::Matrix2Xd nmpc_gradient(const core::Pose2D& state,
                               const TrackingReference& ref,
                               const Eigen::Matrix2Xd& controls,
                               const NmpcConfig& cfg);

/// Projected-gradient solve with Armijo backtracking. A warm start (the
/// previous solution shifted one step, last input repeated) is descended
/// alongside the cold start and the better result wins, so warm-starting
/// can never end worse than cold. Deterministic; every returned control
/// lies inside the box bounds exactly.
NmpcSolution nmpc_solve(const core::Pose2D& state, const TrackingReference& ref,
                        const NmpcSolution* warm, const NmpcConfig& cfg);

}  // namespace subt_beacon::tracker
