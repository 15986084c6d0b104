#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "sphereloc/geometry.hpp"

namespace sphereloc {

/// A 2B x 2B real array sampled on a grid: rows are colatitude rings, columns
/// azimuths.
using Channel = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kMaxBandwidth = 512;

/// Driscoll-Healy equiangular grid with its quadrature weights.
///
/// Colatitudes are theta_j = pi j / (2B), azimuths phi_k = pi k / B for
/// j, k in [0, 2B). The integral of f over the sphere is approximated by
/// sum_j sum_k weight(j) * azimuth_step() * f(j, k), which is exact for
/// functions band-limited below 2B in colatitude.
class SphericalGrid {
 public:
  /// Throws InvalidParameter unless 1 <= bandwidth <= kMaxBandwidth.
  explicit SphericalGrid(int bandwidth);

  int bandwidth() const { return bandwidth_; }
  /// Samples per axis (2B).
  int samples() const { return 2 * bandwidth_; }

  double colatitude(int j) const { return colatitudes_[static_cast<std::size_t>(j)]; }
  double azimuth(int k) const { return azimuths_[static_cast<std::size_t>(k)]; }
  double weight(int j) const { return weights_[static_cast<std::size_t>(j)]; }
  double azimuth_step() const;

  std::span<const double> colatitudes() const { return colatitudes_; }
  std::span<const double> azimuths() const { return azimuths_; }
  std::span<const double> weights() const { return weights_; }

  /// Unit direction of sample (j, k) in the grid's base frame (z up).
  Vec3 direction(int j, int k) const;

  double integrate(const Channel& f) const;
  /// Integral of f * g.
  double inner_product(const Channel& f, const Channel& g) const;

  Channel zeros() const { return Channel::Zero(samples(), samples()); }
  bool matches(const Channel& c) const { return c.rows() == samples() && c.cols() == samples(); }

 private:
  int bandwidth_;
  std::vector<double> colatitudes_;
  std::vector<double> azimuths_;
  std::vector<double> weights_;
  std::vector<double> sin_colat_, cos_colat_, sin_az_, cos_az_;
};

SphericalGrid build_grid(int bandwidth);

enum class Modality : int { Photometry = 0, Range = 1, Intensity = 2 };
inline constexpr int kModalityCount = 3;
inline constexpr std::array<Modality, kModalityCount> kModalities = {
    Modality::Photometry, Modality::Range, Modality::Intensity};
const char* modality_name(Modality m);

/// The fused multi-modal input: photometry, range and intensity channels on
/// one grid. Cells without a measurement hold exactly zero.
class FeatureSphere {
 public:
  FeatureSphere() = default;
  FeatureSphere(int bandwidth, std::array<Channel, kModalityCount> channels);

  int bandwidth() const { return bandwidth_; }
  const Channel& channel(Modality m) const { return channels_[static_cast<std::size_t>(m)]; }
  Channel& channel(Modality m) { return channels_[static_cast<std::size_t>(m)]; }
  const std::array<Channel, kModalityCount>& channels() const { return channels_; }

  /// {3, 2B, 2B}
  std::array<int, 3> shape() const { return {kModalityCount, 2 * bandwidth_, 2 * bandwidth_}; }

  static FeatureSphere zeros(int bandwidth);

 private:
  int bandwidth_ = 0;
  std::array<Channel, kModalityCount> channels_;
};

/// Throws ShapeError if any channel does not match the grid.
FeatureSphere assemble_feature(Channel photometry, Channel range, Channel intensity,
                               const SphericalGrid& grid);

/// LiDAR returns in the sensor frame.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<double> intensities;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  /// Throws InvalidParameter on length mismatch or NaN coordinates.
  void validate() const;
};

/// Grayscale image, row-major, values in [0, 1].
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, double fill = 0.0);

  double& at(int u, int v) { return pixels[static_cast<std::size_t>(v) * width + u]; }
  double at(int u, int v) const { return pixels[static_cast<std::size_t>(v) * width + u]; }
  /// Bilinear sample at continuous pixel coordinates; pixel centers lie on
  /// integer coordinates. Requires 0 <= u <= width-1, 0 <= v <= height-1.
  double bilinear(double u, double v) const;
};

/// Pinhole intrinsics. Camera frame: z forward, x right, y down.
struct CameraIntrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0;
  int height = 0;
};

struct CameraView {
  GrayImage image;
  CameraIntrinsics intrinsics;
  RigidTransform extrinsic;  ///< camera -> base

  void validate() const;
};

struct LidarChannels {
  Channel range;
  Channel intensity;
};

/// Default angular search radius: two grid steps.
double default_max_angle(const SphericalGrid& grid);
inline constexpr int kDefaultLidarNeighbors = 1;

/// Samples range and intensity onto the grid. For every grid direction, the k
/// nearest measurement directions within max_angle are averaged; directions
/// without a measurement stay zero. Ranges are measured in the base frame.
LidarChannels project_lidar(const PointCloud& scan, const RigidTransform& extrinsic,
                            const SphericalGrid& grid, double max_angle, int k);

/// Samples the photometry channel from any number of pinhole cameras. Grid
/// directions are treated as points at infinity; overlapping cameras are
/// averaged.
Channel project_cameras(std::span<const CameraView> views, const SphericalGrid& grid);

/// Zero-mean, unit-variance rescaling over the nonzero cells of a channel.
/// Zero cells stay zero; channels without support are returned unchanged.
Channel standardize(const Channel& channel);

}  // namespace sphereloc
