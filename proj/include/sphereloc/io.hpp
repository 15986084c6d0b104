#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sphereloc/sensors.hpp"

namespace sphereloc {

/// XYZI point cloud: magic "XYZI", u32 count, count * (x, y, z, intensity) f32.
std::vector<std::uint8_t> encode_xyzi(const PointCloud& cloud);
PointCloud decode_xyzi(std::span<const std::uint8_t> bytes);
void write_xyzi(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud read_xyzi(const std::filesystem::path& path);

/// Binary PGM (P5). Values are normalised by maxval on load and quantised on save.
void write_pgm(const std::filesystem::path& path, const GrayImage& image, int maxval = 255);
GrayImage read_pgm(const std::filesystem::path& path);
GrayImage decode_pgm(std::span<const std::uint8_t> bytes);

/// TOML rig description: [lidar] and [[cameras]] tables, each with
/// translation = [x, y, z] and rotation = [w, x, y, z].
SensorRig read_rig(const std::filesystem::path& path);
void write_rig(const std::filesystem::path& path, const SensorRig& rig);

struct TimedPose {
  double timestamp = 0.0;
  Pose pose;
};

/// TUM trajectory: "timestamp tx ty tz qx qy qz qw" per line, '#' comments.
std::vector<TimedPose> read_tum(const std::filesystem::path& path);
void write_tum(const std::filesystem::path& path, std::span<const TimedPose> poses);

}  // namespace sphereloc
