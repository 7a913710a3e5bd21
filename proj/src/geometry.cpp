#include "subt_beacon/geometry.hpp"

#include <stdexcept>

namespace subt_beacon::core {

void CameraIntrinsics::validate() const {
  if (!(fx > 0) || !(fy > 0)) {
    throw std::invalid_argument("intrinsics: focal lengths must be > 0");
  }
  if (!(cx >= 0 && cx < width) || !(cy >= 0 && cy < height)) {
    throw std::invalid_argument("intrinsics: principal point outside sensor");
  }
}

CameraIntrinsics intrinsics_from_fov(int width, int height, double hfov_rad) {
  CameraIntrinsics intr;
  intr.width = width;
  intr.height = height;
  intr.cx = width / 2.0;
  intr.cy = height / 2.0;
  intr.fx = (width / 2.0) / std::tan(hfov_rad / 2.0);
  intr.fy = intr.fx;  // square pixels
  intr.validate();
  return intr;
}

void Extrinsics::validate() const {
  for (const auto* iso : {&camera_to_lidar, &lidar_to_body}) {
    const Eigen::Matrix3d r = iso->rotation();
    const double err = (r * r.transpose() - Eigen::Matrix3d::Identity()).norm();
    if (err >= 1e-9) {
      throw std::invalid_argument("extrinsics: rotation not orthonormal");
    }
  }
}

Extrinsics default_extrinsics(double lidar_height, double camera_drop) {
  Extrinsics ext;
  // Camera axes expressed in the LiDAR frame: x_cam (image right) = -y_lidar,
  // y_cam (image down) = -z_lidar, z_cam (optical axis) = +x_lidar.
  Eigen::Matrix3d r_lc;
  r_lc.col(0) = Eigen::Vector3d(0, -1, 0);
  r_lc.col(1) = Eigen::Vector3d(0, 0, -1);
  r_lc.col(2) = Eigen::Vector3d(1, 0, 0);
  ext.camera_to_lidar.linear() = r_lc;
  ext.camera_to_lidar.translation() = Eigen::Vector3d(0, 0, -camera_drop);
  ext.lidar_to_body.translation() = Eigen::Vector3d(0, 0, lidar_height);
  ext.validate();
  return ext;
}

Bearing pixel_bearing(double u, double v, const CameraIntrinsics& intr) {
  if (!(u >= 0 && u < intr.width) || !(v >= 0 && v < intr.height)) {
    throw std::invalid_argument("pixel_bearing: pixel outside sensor bounds");
  }
  return Bearing{std::atan((intr.cx - u) / intr.fx)};
}

Bearing lidar_bearing(double x, double y) {
  if (x == 0.0 && y == 0.0) {
    throw std::invalid_argument("lidar_bearing: zero vector has no azimuth");
  }
  return Bearing{std::atan2(y, x)};
}

Eigen::Vector2d lidar_to_world(const Eigen::Vector3d& p_l, const Pose2D& robot,
                               const Extrinsics& ext) {
  if (!robot.finite() || !p_l.allFinite()) {
    throw std::invalid_argument("lidar_to_world: non-finite input");
  }
  const Eigen::Vector3d p_b = ext.lidar_to_body * p_l;
  const double c = std::cos(robot.yaw);
  const double s = std::sin(robot.yaw);
  return {robot.x + c * p_b.x() - s * p_b.y(),
          robot.y + s * p_b.x() + c * p_b.y()};
}

std::optional<PixelPoint> project_to_pixel(const Eigen::Vector3d& p_l,
                                           const CameraIntrinsics& intr,
                                           const Extrinsics& ext) {
  const Eigen::Vector3d p_c = ext.camera_to_lidar.inverse() * p_l;
  if (p_c.z() <= 1e-9) return std::nullopt;
  PixelPoint px;
  px.u = intr.cx + intr.fx * p_c.x() / p_c.z();
  px.v = intr.cy + intr.fy * p_c.y() / p_c.z();
  px.depth = p_c.z();
  if (px.u < 0 || px.u >= intr.width || px.v < 0 || px.v >= intr.height) {
    return std::nullopt;
  }
  return px;
}

}  // namespace subt_beacon::core
