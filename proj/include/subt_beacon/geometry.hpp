#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <optional>

namespace subt_beacon::core {

inline constexpr double kPi = std::numbers::pi;

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

/// Azimuth about the vertical axis, positive to the robot's left,
/// wrapped to (-pi, pi]. The same convention is used for camera- and
/// LiDAR-derived angles so the two are directly comparable.
struct Bearing {
  double theta = 0.0;
};

struct CameraIntrinsics {
  double fx = 0, fy = 0;   // focal lengths, px
  double cx = 0, cy = 0;   // principal point, px
  int width = 0, height = 0;

  void validate() const;
};

/// Ideal pinhole intrinsics from resolution and horizontal field of view.
CameraIntrinsics intrinsics_from_fov(int width, int height, double hfov_rad);

/// Planar robot pose in the world frame; yaw counterclockwise-positive.
struct Pose2D {
  double x = 0, y = 0, yaw = 0;

  bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(yaw);
  }
};

/// Rigid transforms tying the sensors to the robot body.
struct Extrinsics {
  Eigen::Isometry3d camera_to_lidar = Eigen::Isometry3d::Identity();
  Eigen::Isometry3d lidar_to_body = Eigen::Isometry3d::Identity();

  void validate() const;
};

/// Camera mounted `camera_drop` meters directly below the LiDAR origin,
/// optical axis aligned with the LiDAR's forward (+x) axis; LiDAR sits
/// `lidar_height` above the body origin (ground point between the wheels).
Extrinsics default_extrinsics(double lidar_height = 0.5,
                              double camera_drop = 0.08);

/// Azimuth of an image column. v is accepted and ignored: the angle is
/// computed from the de-projected column only, matching a unit-depth
/// approximation of the pixel ray.
Bearing pixel_bearing(double u, double v, const CameraIntrinsics& intr);

/// Azimuth of a point in the LiDAR frame, about the x axis.
Bearing lidar_bearing(double x, double y);

/// LiDAR-frame point to planar world coordinates; z is dropped.
Eigen::Vector2d lidar_to_world(const Eigen::Vector3d& p_l, const Pose2D& robot,
                               const Extrinsics& ext);

struct PixelPoint {
  double u = 0, v = 0;
  double depth = 0;  // camera-frame z, m
};

/// Projects a LiDAR-frame point through the camera; empty when the point
/// is behind the image plane or lands outside the sensor.
std::optional<PixelPoint> project_to_pixel(const Eigen::Vector3d& p_l,
                                           const CameraIntrinsics& intr,
                                           const Extrinsics& ext);

}  // namespace subt_beacon::core
