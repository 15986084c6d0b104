#include "sphereloc/sensors.hpp"

#include <cmath>
#include <numbers>

namespace sphereloc {

using std::numbers::pi;

double LidarModel::default_half_fov(int beams) { return beams >= 128 ? pi / 4.0 : pi / 8.0; }

LidarModel LidarModel::high_fidelity() {
  LidarModel m;
  m.beams = 128;
  m.points_per_ring = 1024;
  m.half_fov = default_half_fov(m.beams);
  return m;
}

LidarModel LidarModel::low_fidelity() {
  LidarModel m;
  m.beams = 64;
  m.points_per_ring = 1024;
  m.half_fov = default_half_fov(m.beams);
  return m;
}

Eigen::Quaterniond camera_to_base_rotation(double yaw) {
  Eigen::Matrix3d optical;
  // Columns: camera x (right), y (down), z (forward) expressed in the base frame.
  optical << 0, 0, 1,
            -1, 0, 0,
             0, -1, 0;
  const Eigen::Matrix3d r = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix() * optical;
  return Eigen::Quaterniond(r).normalized();
}

CameraIntrinsics pinhole_intrinsics(int width, int height, double horizontal_fov) {
  CameraIntrinsics k;
  k.width = width;
  k.height = height;
  k.fx = (width / 2.0) / std::tan(horizontal_fov / 2.0);
  k.fy = k.fx;
  k.cx = (width - 1) / 2.0;
  k.cy = (height - 1) / 2.0;
  return k;
}

namespace {

CameraModel make_camera(const char* name, double yaw, const Vec3& offset, double image_scale) {
  const int w = std::max(8, static_cast<int>(std::lround(768 * image_scale)));
  const int h = std::max(8, static_cast<int>(std::lround(512 * image_scale)));
  CameraModel c;
  c.name = name;
  c.intrinsics = pinhole_intrinsics(w, h, pi / 2.0);
  c.extrinsic.rotation = camera_to_base_rotation(yaw);
  c.extrinsic.translation = offset;
  return c;
}

}  // namespace

SensorRig SensorRig::high_fidelity(double image_scale) {
  SensorRig rig;
  rig.lidar = LidarModel::high_fidelity();
  rig.cameras.push_back(make_camera("front_left", 0.0, {0.10, 0.06, -0.10}, image_scale));
  rig.cameras.push_back(make_camera("front_right", 0.0, {0.10, -0.06, -0.10}, image_scale));
  rig.cameras.push_back(make_camera("left", pi / 2.0, {0.0, 0.10, -0.10}, image_scale));
  rig.cameras.push_back(make_camera("right", -pi / 2.0, {0.0, -0.10, -0.10}, image_scale));
  return rig;
}

SensorRig SensorRig::low_fidelity(double image_scale) {
  SensorRig rig;
  rig.lidar = LidarModel::low_fidelity();
  rig.cameras.push_back(make_camera("front", 0.0, {0.10, 0.0, -0.10}, image_scale));
  return rig;
}

}  // namespace sphereloc
