#include "sphereloc/sphere_grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <tuple>

#include "sphereloc/errors.hpp"
#include "sphereloc/kdtree.hpp"

namespace sphereloc {

using std::numbers::pi;

SphericalGrid::SphericalGrid(int bandwidth) : bandwidth_(bandwidth) {
  if (bandwidth < 1 || bandwidth > kMaxBandwidth) {
    throw InvalidParameter("bandwidth must lie in [1, " + std::to_string(kMaxBandwidth) +
                           "], got " + std::to_string(bandwidth));
  }
  const int n = samples();
  colatitudes_.resize(n);
  azimuths_.resize(n);
  weights_.resize(n);
  sin_colat_.resize(n);
  cos_colat_.resize(n);
  sin_az_.resize(n);
  cos_az_.resize(n);
  const double b = bandwidth;
  for (int j = 0; j < n; ++j) {
    const double theta = pi * j / (2.0 * b);
    colatitudes_[j] = theta;
    double sum = 0.0;
    for (int q = 0; q < bandwidth; ++q) {
      sum += std::sin((2 * q + 1) * theta) / (2 * q + 1);
    }
    weights_[j] = (2.0 / b) * std::sin(theta) * sum;
    sin_colat_[j] = std::sin(theta);
    cos_colat_[j] = std::cos(theta);
  }
  for (int k = 0; k < n; ++k) {
    azimuths_[k] = pi * k / b;
    sin_az_[k] = std::sin(azimuths_[k]);
    cos_az_[k] = std::cos(azimuths_[k]);
  }
}

double SphericalGrid::azimuth_step() const { return pi / bandwidth_; }

Vec3 SphericalGrid::direction(int j, int k) const {
  return {sin_colat_[j] * cos_az_[k], sin_colat_[j] * sin_az_[k], cos_colat_[j]};
}

double SphericalGrid::integrate(const Channel& f) const {
  if (!matches(f)) throw ShapeError("channel does not match grid");
  double total = 0.0;
  for (int j = 0; j < samples(); ++j) total += weights_[j] * f.row(j).sum();
  return total * azimuth_step();
}

double SphericalGrid::inner_product(const Channel& f, const Channel& g) const {
  if (!matches(f) || !matches(g)) throw ShapeError("channel does not match grid");
  double total = 0.0;
  for (int j = 0; j < samples(); ++j) total += weights_[j] * f.row(j).dot(g.row(j));
  return total * azimuth_step();
}

SphericalGrid build_grid(int bandwidth) { return SphericalGrid(bandwidth); }

const char* modality_name(Modality m) {
  switch (m) {
    case Modality::Photometry: return "photometry";
    case Modality::Range: return "range";
    case Modality::Intensity: return "intensity";
  }
  return "unknown";
}

FeatureSphere::FeatureSphere(int bandwidth, std::array<Channel, kModalityCount> channels)
    : bandwidth_(bandwidth), channels_(std::move(channels)) {
  for (const auto& c : channels_) {
    if (c.rows() != 2 * bandwidth || c.cols() != 2 * bandwidth) {
      throw ShapeError("feature channel is " + std::to_string(c.rows()) + "x" +
                       std::to_string(c.cols()) + ", expected " + std::to_string(2 * bandwidth) +
                       " square");
    }
  }
}

FeatureSphere FeatureSphere::zeros(int bandwidth) {
  const int n = 2 * bandwidth;
  return FeatureSphere(bandwidth, {Channel::Zero(n, n), Channel::Zero(n, n), Channel::Zero(n, n)});
}

FeatureSphere assemble_feature(Channel photometry, Channel range, Channel intensity,
                               const SphericalGrid& grid) {
  for (const Channel* c : {&photometry, &range, &intensity}) {
    if (!grid.matches(*c)) {
      throw ShapeError("channel of shape " + std::to_string(c->rows()) + "x" +
                       std::to_string(c->cols()) + " does not match a " +
                       std::to_string(grid.samples()) + "x" + std::to_string(grid.samples()) +
                       " grid");
    }
  }
  return FeatureSphere(grid.bandwidth(),
                       {std::move(photometry), std::move(range), std::move(intensity)});
}

void PointCloud::validate() const {
  if (points.size() != intensities.size()) {
    throw InvalidParameter("point cloud has " + std::to_string(points.size()) + " points but " +
                           std::to_string(intensities.size()) + " intensities");
  }
  for (const auto& p : points) {
    if (p.hasNaN()) throw InvalidParameter("point cloud contains NaN coordinates");
  }
}

GrayImage::GrayImage(int w, int h, double fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

double GrayImage::bilinear(double u, double v) const {
  const int u0 = std::min(static_cast<int>(std::floor(u)), width - 1);
  const int v0 = std::min(static_cast<int>(std::floor(v)), height - 1);
  const int u1 = std::min(u0 + 1, width - 1);
  const int v1 = std::min(v0 + 1, height - 1);
  const double du = u - u0;
  const double dv = v - v0;
  const double top = (1.0 - du) * at(u0, v0) + du * at(u1, v0);
  const double bottom = (1.0 - du) * at(u0, v1) + du * at(u1, v1);
  return (1.0 - dv) * top + dv * bottom;
}

void CameraView::validate() const {
  if (!(intrinsics.fx > 0.0) || !(intrinsics.fy > 0.0)) {
    throw InvalidParameter("camera focal lengths must be positive");
  }
  if (image.width <= 0 || image.height <= 0) {
    throw InvalidParameter("camera image must have positive dimensions");
  }
}

double default_max_angle(const SphericalGrid& grid) { return 2.0 * pi / grid.samples(); }

LidarChannels project_lidar(const PointCloud& scan, const RigidTransform& extrinsic,
                            const SphericalGrid& grid, double max_angle, int k) {
  scan.validate();
  if (!(max_angle > 0.0)) throw InvalidParameter("max_angle must be positive");
  if (k < 1) throw InvalidParameter("k must be at least 1");

  LidarChannels out{grid.zeros(), grid.zeros()};

  std::vector<double> directions;
  std::vector<double> ranges;
  std::vector<double> intensities;
  directions.reserve(scan.size() * 3);
  for (std::size_t i = 0; i < scan.size(); ++i) {
    const Vec3 p = extrinsic.apply(scan.points[i]);
    const double r = p.norm();
    if (!(r > 0.0)) continue;
    const Vec3 d = p / r;
    directions.insert(directions.end(), {d.x(), d.y(), d.z()});
    ranges.push_back(r);
    intensities.push_back(scan.intensities[i]);
  }
  if (ranges.empty()) return out;

  const KdTree<double> tree(std::move(directions), 3);
  // Chord length is monotone in angle: |a - b|^2 = 2 - 2 cos(angle).
  const double max_chord_sq = max_angle >= pi ? 4.0 : 2.0 - 2.0 * std::cos(max_angle);

  struct Sample {
    double distance_sq, range, intensity;
  };
  std::vector<Sample> picked;
  const auto kk = static_cast<std::size_t>(k);
  for (int j = 0; j < grid.samples(); ++j) {
    for (int c = 0; c < grid.samples(); ++c) {
      const Vec3 d = grid.direction(j, c);
      const double q[3] = {d.x(), d.y(), d.z()};
      // One extra neighbour reveals a tie at the k-th distance; ties are then
      // resolved by value so the result does not depend on point order.
      auto nn = tree.knn(q, kk + 1, max_chord_sq);
      if (nn.empty()) continue;
      if (nn.size() > kk && nn[kk].distance_sq == nn[kk - 1].distance_sq) {
        nn = tree.knn(q, tree.size(), nn[kk - 1].distance_sq);
      }
      picked.clear();
      for (const auto& n : nn) picked.push_back({n.distance_sq, ranges[n.id], intensities[n.id]});
      std::sort(picked.begin(), picked.end(), [](const Sample& a, const Sample& b) {
        return std::tie(a.distance_sq, a.range, a.intensity) <
               std::tie(b.distance_sq, b.range, b.intensity);
      });
      if (picked.size() > kk) picked.resize(kk);
      double r = 0.0, in = 0.0;
      for (const auto& s : picked) {
        r += s.range;
        in += s.intensity;
      }
      out.range(j, c) = r / static_cast<double>(picked.size());
      out.intensity(j, c) = in / static_cast<double>(picked.size());
    }
  }
  return out;
}

Channel project_cameras(std::span<const CameraView> views, const SphericalGrid& grid) {
  for (const auto& v : views) v.validate();
  Channel sum = grid.zeros();
  Channel hits = grid.zeros();
  for (const auto& view : views) {
    const Eigen::Matrix3d to_camera = view.extrinsic.rotation.conjugate().toRotationMatrix();
    const auto& K = view.intrinsics;
    const double u_max = view.image.width - 1;
    const double v_max = view.image.height - 1;
    for (int j = 0; j < grid.samples(); ++j) {
      for (int c = 0; c < grid.samples(); ++c) {
        const Vec3 d = to_camera * grid.direction(j, c);
        if (!(d.z() > 0.0)) continue;
        const double u = K.fx * d.x() / d.z() + K.cx;
        const double v = K.fy * d.y() / d.z() + K.cy;
        if (u < 0.0 || v < 0.0 || u > u_max || v > v_max) continue;
        sum(j, c) += view.image.bilinear(u, v);
        hits(j, c) += 1.0;
      }
    }
  }
  for (Eigen::Index i = 0; i < sum.size(); ++i) {
    if (hits.data()[i] > 0.0) sum.data()[i] /= hits.data()[i];
  }
  return sum;
}

Channel standardize(const Channel& channel) {
  double sum = 0.0;
  std::size_t n = 0;
  for (Eigen::Index i = 0; i < channel.size(); ++i) {
    const double v = channel.data()[i];
    if (v != 0.0) {
      sum += v;
      ++n;
    }
  }
  if (n == 0) return channel;
  const double mean = sum / static_cast<double>(n);
  double var = 0.0;
  for (Eigen::Index i = 0; i < channel.size(); ++i) {
    const double v = channel.data()[i];
    if (v != 0.0) var += (v - mean) * (v - mean);
  }
  var /= static_cast<double>(n);
  const double scale = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;
  Channel out = channel;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    double& v = out.data()[i];
    if (v != 0.0) v = (v - mean) * scale;
  }
  return out;
}

}  // namespace sphereloc
