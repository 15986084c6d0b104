#include "sphereloc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "sphereloc/errors.hpp"
#include "sphereloc/io.hpp"
#include "sphereloc/parallel.hpp"

namespace sphereloc {

namespace {

constexpr double kHitEpsilon = 1e-9;

bool vec_equal(const Vec3& a, const Vec3& b) { return a.x() == b.x() && a.y() == b.y() && a.z() == b.z(); }

// Slab intersection; returns entry distance and outward normal of the entry face.
bool intersect_box(const Box& box, const Vec3& origin, const Vec3& dir, double max_t, double& t_hit,
                   Vec3& normal) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  int axis = -1;
  for (int a = 0; a < 3; ++a) {
    if (dir[a] == 0.0) {
      if (origin[a] < box.min[a] || origin[a] > box.max[a]) return false;
      continue;
    }
    const double inv = 1.0 / dir[a];
    double t0 = (box.min[a] - origin[a]) * inv;
    double t1 = (box.max[a] - origin[a]) * inv;
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > t_near) {
      t_near = t0;
      axis = a;
    }
    t_far = std::min(t_far, t1);
    if (t_near > t_far) return false;
  }
  if (axis < 0 || t_near <= kHitEpsilon || t_near > max_t) return false;
  t_hit = t_near;
  normal = Vec3::Zero();
  normal[axis] = dir[axis] > 0 ? -1.0 : 1.0;
  return true;
}

// Uniform 2D grid over box footprints, traversed cell by cell along a ray.
class BoxIndex {
 public:
  explicit BoxIndex(const World& world, double cell = 4.0) : world_(world), cell_(cell) {
    if (world.boxes.empty()) return;
    Eigen::Vector2d lo = world.boxes.front().min.head<2>(), hi = world.boxes.front().max.head<2>();
    for (const auto& b : world.boxes) {
      lo = lo.cwiseMin(b.min.head<2>());
      hi = hi.cwiseMax(b.max.head<2>());
    }
    lo_ = lo;
    nx_ = std::max(1, static_cast<int>(std::ceil((hi.x() - lo.x()) / cell_)));
    ny_ = std::max(1, static_cast<int>(std::ceil((hi.y() - lo.y()) / cell_)));
    hi_ = lo_ + Eigen::Vector2d(nx_ * cell_, ny_ * cell_);
    cells_.resize(static_cast<std::size_t>(nx_) * ny_);
    for (std::size_t i = 0; i < world.boxes.size(); ++i) {
      const auto& b = world.boxes[i];
      const int x0 = clamp_x(static_cast<int>(std::floor((b.min.x() - lo_.x()) / cell_)));
      const int x1 = clamp_x(static_cast<int>(std::floor((b.max.x() - lo_.x()) / cell_)));
      const int y0 = clamp_y(static_cast<int>(std::floor((b.min.y() - lo_.y()) / cell_)));
      const int y1 = clamp_y(static_cast<int>(std::floor((b.max.y() - lo_.y()) / cell_)));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) cells_[static_cast<std::size_t>(y) * nx_ + x].push_back(i);
      }
    }
  }

  std::optional<RayHit> cast(const Vec3& origin, const Vec3& dir, double max_range) const {
    std::optional<RayHit> best;
    double best_t = max_range;
    if (dir.z() < 0.0 && origin.z() > 0.0) {
      const double t = -origin.z() / dir.z();
      if (t <= best_t) {
        best_t = t;
        best = RayHit{t, Vec3::UnitZ(), world_.ground_reflectivity, world_.ground_albedo};
      }
    }
    if (cells_.empty()) return best;

    // Clip the ray's planar projection against the grid rectangle.
    double t_enter = 0.0, t_leave = best_t;
    for (int a = 0; a < 2; ++a) {
      if (dir[a] == 0.0) {
        if (origin[a] < lo_[a] || origin[a] > hi_[a]) return best;
        continue;
      }
      double t0 = (lo_[a] - origin[a]) / dir[a];
      double t1 = (hi_[a] - origin[a]) / dir[a];
      if (t0 > t1) std::swap(t0, t1);
      t_enter = std::max(t_enter, t0);
      t_leave = std::min(t_leave, t1);
    }
    if (t_enter > t_leave) return best;

    const Vec3 start = origin + t_enter * dir;
    int cx = clamp_x(static_cast<int>(std::floor((start.x() - lo_.x()) / cell_)));
    int cy = clamp_y(static_cast<int>(std::floor((start.y() - lo_.y()) / cell_)));
    const int step_x = dir.x() > 0 ? 1 : -1;
    const int step_y = dir.y() > 0 ? 1 : -1;
    const double inf = std::numeric_limits<double>::infinity();
    const double delta_x = dir.x() != 0.0 ? cell_ / std::abs(dir.x()) : inf;
    const double delta_y = dir.y() != 0.0 ? cell_ / std::abs(dir.y()) : inf;
    double next_x = dir.x() != 0.0
                        ? (lo_.x() + (cx + (step_x > 0 ? 1 : 0)) * cell_ - origin.x()) / dir.x()
                        : inf;
    double next_y = dir.y() != 0.0
                        ? (lo_.y() + (cy + (step_y > 0 ? 1 : 0)) * cell_ - origin.y()) / dir.y()
                        : inf;
    while (true) {
      for (std::size_t i : cells_[static_cast<std::size_t>(cy) * nx_ + cx]) {
        const Box& box = world_.boxes[i];
        double t;
        Vec3 n;
        if (intersect_box(box, origin, dir, best_t, t, n) && t < best_t) {
          best_t = t;
          best = RayHit{t, n, box.reflectivity, box.albedo};
        }
      }
      const double cell_exit = std::min(next_x, next_y);
      if (best_t <= cell_exit || cell_exit > t_leave) break;
      if (next_x < next_y) {
        cx += step_x;
        next_x += delta_x;
        if (cx < 0 || cx >= nx_) break;
      } else {
        cy += step_y;
        next_y += delta_y;
        if (cy < 0 || cy >= ny_) break;
      }
    }
    return best;
  }

 private:
  int clamp_x(int x) const { return std::clamp(x, 0, nx_ - 1); }
  int clamp_y(int y) const { return std::clamp(y, 0, ny_ - 1); }

  const World& world_;
  double cell_;
  Eigen::Vector2d lo_ = Eigen::Vector2d::Zero(), hi_ = Eigen::Vector2d::Zero();
  int nx_ = 0, ny_ = 0;
  std::vector<std::vector<std::size_t>> cells_;
};

}  // namespace

bool operator==(const World& a, const World& b) {
  if (a.seed != b.seed || a.extent != b.extent || a.ground_reflectivity != b.ground_reflectivity ||
      a.ground_albedo != b.ground_albedo || a.boxes.size() != b.boxes.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.boxes.size(); ++i) {
    const Box& x = a.boxes[i];
    const Box& y = b.boxes[i];
    if (!vec_equal(x.min, y.min) || !vec_equal(x.max, y.max) || x.reflectivity != y.reflectivity ||
        x.albedo != y.albedo) {
      return false;
    }
  }
  return true;
}

std::optional<RayHit> World::cast(const Vec3& origin, const Vec3& direction, double max_range) const {
  return BoxIndex(*this).cast(origin, direction.normalized(), max_range);
}

bool World::is_free(const Vec3& p, double clearance) const {
  for (const auto& b : boxes) {
    const double dx = std::max({b.min.x() - p.x(), 0.0, p.x() - b.max.x()});
    const double dy = std::max({b.min.y() - p.y(), 0.0, p.y() - b.max.y()});
    if (std::hypot(dx, dy) < clearance) return false;
  }
  return true;
}

World generate_world(std::uint64_t seed, int n_boxes, double extent) {
  if (n_boxes < 0) throw InvalidParameter("n_boxes must be non-negative");
  if (!(extent > 0.0)) throw InvalidParameter("extent must be positive");
  World world;
  world.seed = seed;
  world.extent = extent;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-extent / 2.0, extent / 2.0);
  std::uniform_real_distribution<double> footprint(0.8, 4.0);
  std::uniform_real_distribution<double> height(1.0, 6.0);
  std::uniform_real_distribution<double> material(0.1, 0.95);
  const Vec3 origin = Vec3::Zero();
  World probe;
  while (static_cast<int>(world.boxes.size()) < n_boxes) {
    Box b;
    const double cx = pos(rng), cy = pos(rng);
    const double sx = footprint(rng), sy = footprint(rng), h = height(rng);
    b.min = Vec3(cx - sx / 2.0, cy - sy / 2.0, 0.0);
    b.max = Vec3(cx + sx / 2.0, cy + sy / 2.0, h);
    b.reflectivity = material(rng);
    b.albedo = material(rng);
    probe.boxes.assign(1, b);
    if (!probe.is_free(origin, kSpawnClearance)) continue;
    world.boxes.push_back(b);
  }
  return world;
}

PointCloud render_scan(const World& world, const Pose& sensor_pose, int beams, int points_per_ring,
                       double max_range) {
  LidarModel lidar;
  lidar.beams = beams;
  lidar.points_per_ring = points_per_ring;
  lidar.half_fov = LidarModel::default_half_fov(beams);
  lidar.max_range = max_range;
  return render_scan(world, sensor_pose, lidar, 0);
}

PointCloud render_scan(const World& world, const Pose& sensor_pose, const LidarModel& lidar,
                       std::uint64_t noise_seed) {
  if (lidar.beams < 1 || lidar.points_per_ring < 1) throw InvalidParameter("lidar needs beams and points");
  if (!(lidar.max_range > 0.0)) throw InvalidParameter("max_range must be positive");
  const Vec3 origin = sensor_pose.translation;
  const BoxIndex index(world);
  const double az_step = 2.0 * std::numbers::pi / lidar.points_per_ring;

  std::vector<PointCloud> rings(static_cast<std::size_t>(lidar.beams));
  parallel_for(rings.size(), [&](std::size_t i) {
    const double elevation =
        lidar.beams == 1 ? 0.0 : -lidar.half_fov + 2.0 * lidar.half_fov * static_cast<double>(i) / (lidar.beams - 1);
    // Irrational per-ring azimuth stagger keeps rings from lining up on exact ties.
    const double stagger = az_step * std::fmod(static_cast<double>(i) * 0.6180339887498949, 1.0);
    std::mt19937_64 rng(noise_seed * 0x9E3779B97F4A7C15ull + i);
    std::normal_distribution<double> noise(0.0, lidar.range_noise_sigma);
    PointCloud& ring = rings[i];
    const double ce = std::cos(elevation), se = std::sin(elevation);
    for (int k = 0; k < lidar.points_per_ring; ++k) {
      const double az = k * az_step + stagger;
      const Vec3 local(ce * std::cos(az), ce * std::sin(az), se);
      const Vec3 dir = sensor_pose.rotate(local);
      const auto hit = index.cast(origin, dir, lidar.max_range);
      if (!hit) continue;
      double r = hit->distance;
      if (lidar.range_noise_sigma > 0.0) r = std::max(0.0, r + noise(rng));
      ring.points.push_back(local * r);
      ring.intensities.push_back(hit->reflectivity / (1.0 + kAttenuation * hit->distance * hit->distance));
    }
  });
  PointCloud out;
  for (auto& ring : rings) {
    out.points.insert(out.points.end(), ring.points.begin(), ring.points.end());
    out.intensities.insert(out.intensities.end(), ring.intensities.begin(), ring.intensities.end());
  }
  return out;
}

Vec3 light_direction() { return Vec3(0.5, 0.35, 0.8).normalized(); }

std::vector<CameraView> render_images(const World& world, const Pose& base_pose, const SensorRig& rig) {
  constexpr double kCameraRange = 1000.0;
  const Vec3 light = light_direction();
  const BoxIndex index(world);
  std::vector<CameraView> views;
  views.reserve(rig.cameras.size());
  for (const auto& cam : rig.cameras) {
    const auto& k = cam.intrinsics;
    if (k.width <= 0 || k.height <= 0 || !(k.fx > 0) || !(k.fy > 0)) {
      throw InvalidParameter("camera '" + cam.name + "' has invalid intrinsics");
    }
    const RigidTransform cam_to_world = base_pose * cam.extrinsic;
    const Vec3 origin = cam_to_world.translation;
    CameraView view;
    view.intrinsics = k;
    view.extrinsic = cam.extrinsic;
    view.image = GrayImage(k.width, k.height, kSkyValue);
    parallel_for(static_cast<std::size_t>(k.height), [&](std::size_t row) {
      const int v = static_cast<int>(row);
      for (int u = 0; u < k.width; ++u) {
        const Vec3 d_cam((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
        const Vec3 dir = cam_to_world.rotate(d_cam.normalized());
        const auto hit = index.cast(origin, dir, kCameraRange);
        if (hit) view.image.at(u, v) = hit->albedo * std::max(0.0, hit->normal.dot(light));
      }
    });
    views.push_back(std::move(view));
  }
  return views;
}

Frame render_frame(const World& world, const Pose& base_pose, const SensorRig& rig, std::uint64_t noise_seed) {
  Frame f;
  f.pose = base_pose;
  f.scan = render_scan(world, base_pose * rig.lidar_extrinsic, rig.lidar, noise_seed);
  f.views = render_images(world, base_pose, rig);
  return f;
}

void write_dataset(const std::filesystem::path& dir, const World& world, std::span<const Pose> poses,
                   const SensorRig& rig) {
  std::filesystem::create_directories(dir / "scans");
  std::filesystem::create_directories(dir / "images");
  std::vector<TimedPose> timed;
  timed.reserve(poses.size());
  char name[32];
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const Frame f = render_frame(world, poses[i], rig, i);
    std::snprintf(name, sizeof name, "%06zu", i);
    write_xyzi(dir / "scans" / (std::string(name) + ".xyzi"), f.scan);
    for (std::size_t c = 0; c < f.views.size(); ++c) {
      write_pgm(dir / "images" / (std::string(name) + "_" + rig.cameras[c].name + ".pgm"), f.views[c].image);
    }
    timed.push_back({static_cast<double>(i), poses[i]});
  }
  write_tum(dir / "poses.txt", timed);
  write_rig(dir / "rig.toml", rig);
}

}  // namespace sphereloc
