#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "sphereloc/sensors.hpp"

namespace sphereloc {

struct Box {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
  double reflectivity = 0.5;
  double albedo = 0.5;
};

struct RayHit {
  double distance = 0.0;
  Vec3 normal = Vec3::UnitZ();
  double reflectivity = 0.0;
  double albedo = 0.0;
};

/// Axis-aligned boxes standing on the ground plane z = 0.
struct World {
  std::uint64_t seed = 0;
  double extent = 0.0;  ///< box footprint centres lie in [-extent/2, extent/2]^2
  double ground_reflectivity = 0.3;
  double ground_albedo = 0.45;
  std::vector<Box> boxes;

  std::optional<RayHit> cast(const Vec3& origin, const Vec3& direction, double max_range) const;
  /// True if p is at least `clearance` metres from every box footprint.
  bool is_free(const Vec3& p, double clearance) const;

  friend bool operator==(const World& a, const World& b);
};

inline constexpr double kSpawnClearance = 3.0;
inline constexpr double kAttenuation = 0.01;  ///< per m^2
inline constexpr double kSkyValue = 0.8;

/// Seeded boxes on a ground plane; none intersects the spawn disc around the origin.
World generate_world(std::uint64_t seed, int n_boxes, double extent);

/// Ray-cast LiDAR scan; points are in the sensor frame, misses are omitted,
/// intensity = reflectivity / (1 + kAttenuation range^2).
PointCloud render_scan(const World& world, const Pose& sensor_pose, int beams, int points_per_ring,
                       double max_range);
PointCloud render_scan(const World& world, const Pose& sensor_pose, const LidarModel& lidar,
                       std::uint64_t noise_seed = 0);

/// Light direction used for Lambertian shading (world frame, unit length).
Vec3 light_direction();

/// Renders every rig camera at the base pose. Pixels: albedo * max(0, n.l),
/// sky = kSkyValue.
std::vector<CameraView> render_images(const World& world, const Pose& base_pose, const SensorRig& rig);

/// A rendered frame: scan in the LiDAR frame, images, and the pose used.
struct Frame {
  Pose pose;
  PointCloud scan;
  std::vector<CameraView> views;
};

Frame render_frame(const World& world, const Pose& base_pose, const SensorRig& rig,
                   std::uint64_t noise_seed = 0);

/// Writes scans/, images/, poses.txt (TUM) and rig.toml under `dir`.
void write_dataset(const std::filesystem::path& dir, const World& world, std::span<const Pose> poses,
                   const SensorRig& rig);

}  // namespace sphereloc
