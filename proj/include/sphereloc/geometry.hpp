#pragma once

#include <cmath>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace sphereloc {

using Vec3 = Eigen::Vector3d;

/// Rigid transform mapping points from a child frame into a parent frame:
/// p_parent = rotation * p_child + translation.
struct RigidTransform {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 rotate(const Vec3& v) const { return rotation * v; }

  RigidTransform inverse() const {
    RigidTransform inv;
    inv.rotation = rotation.conjugate();
    inv.translation = -(inv.rotation * translation);
    return inv;
  }

  RigidTransform operator*(const RigidTransform& rhs) const {
    RigidTransform out;
    out.rotation = (rotation * rhs.rotation).normalized();
    out.translation = rotation * rhs.translation + translation;
    return out;
  }

  static RigidTransform identity() { return {}; }

  static RigidTransform from_yaw(double yaw, const Vec3& translation = Vec3::Zero()) {
    RigidTransform t;
    t.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Vec3::UnitZ()));
    t.translation = translation;
    return t;
  }
};

/// Poses are body-to-world transforms.
using Pose = RigidTransform;

/// Heading of the body x-axis projected onto the world xy-plane.
inline double yaw_of(const Pose& pose) {
  const Vec3 x = pose.rotation * Vec3::UnitX();
  return std::atan2(x.y(), x.x());
}

}  // namespace sphereloc
