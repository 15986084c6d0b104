#pragma once

#include <string>
#include <vector>

#include "sphereloc/sphere_grid.hpp"

namespace sphereloc {

/// Spinning LiDAR: `beams` rings evenly spread over [-half_fov, +half_fov]
/// elevation, `points_per_ring` azimuth samples each.
struct LidarModel {
  int beams = 128;
  int points_per_ring = 1024;
  double half_fov = 0.0;  ///< radians
  double max_range = 50.0;
  double range_noise_sigma = 0.0;  ///< metres; 0 disables noise

  /// +-45 deg for 128 or more beams, +-22.5 deg otherwise.
  static double default_half_fov(int beams);
  static LidarModel high_fidelity();  ///< 128 beams
  static LidarModel low_fidelity();   ///< 64 beams
};

struct CameraModel {
  std::string name;
  CameraIntrinsics intrinsics;
  RigidTransform extrinsic;  ///< camera -> base
};

struct SensorRig {
  RigidTransform lidar_extrinsic;  ///< lidar -> base
  LidarModel lidar;
  std::vector<CameraModel> cameras;

  /// 128-beam LiDAR with two forward cameras and one to each side.
  /// `image_scale` shrinks the 768x512 images (1.0 = full resolution).
  static SensorRig high_fidelity(double image_scale = 1.0);
  /// 64-beam LiDAR and a single forward camera.
  static SensorRig low_fidelity(double image_scale = 1.0);
};

/// Rotation taking a camera frame (z forward, x right, y down) to a base frame
/// (x forward, y left, z up) for a camera looking along base yaw angle `yaw`.
Eigen::Quaterniond camera_to_base_rotation(double yaw);

/// Pinhole intrinsics with the given horizontal field of view, principal point centred.
CameraIntrinsics pinhole_intrinsics(int width, int height, double horizontal_fov);

}  // namespace sphereloc
