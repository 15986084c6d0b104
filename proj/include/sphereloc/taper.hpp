#pragma once

#include <array>
#include <filesystem>
#include <numbers>
#include <vector>

#include <Eigen/Core>

#include "sphereloc/spectra.hpp"

namespace sphereloc {

/// Orthonormal zonal windows maximally concentrated in a spherical cap.
///
/// Taper i is h_i(w) = sum_l coefficients[i](l) Y_l0(angle(w, center)) for
/// l < taper_degrees. Concentrations are the fraction of each taper's energy
/// inside the cap, sorted non-increasing.
struct TaperBank {
  double cap_half_angle = 0.0;
  int taper_degrees = 0;
  Vec3 center = Vec3::UnitZ();
  std::vector<Eigen::VectorXd> coefficients;
  std::vector<double> concentrations;
  int grid_bandwidth = 0;
  std::vector<Channel> sampled;  ///< tapers evaluated on the grid

  int size() const { return static_cast<int>(coefficients.size()); }
  bool empty() const { return coefficients.empty(); }
};

inline constexpr double kDefaultCapHalfAngle = std::numbers::pi / 6.0;
inline constexpr int kDefaultTaperDegrees = 20;
inline constexpr int kMaxShannonTapers = 8;

/// floor((L_h + 1)^2 * cap area fraction), clamped to [1, kMaxShannonTapers].
int shannon_taper_count(double cap_half_angle, int taper_degrees);

/// D(l, l') = integral over the cap of Y_l0 Y_l'0, for l, l' < taper_degrees.
Eigen::MatrixXd cap_concentration_kernel(double cap_half_angle, int taper_degrees);

/// Solves the zonal concentration eigenproblem and samples the leading count
/// eigenfunctions on the grid. Each taper is signed so that its value at the
/// cap centre is non-negative.
///
/// Throws InvalidParameter if cap_half_angle is outside (0, pi], if count is
/// outside [1, taper_degrees], or if taper_degrees exceeds the grid bandwidth
/// (the grid quadrature would no longer be exact for taper products).
TaperBank build_taper_bank(double cap_half_angle, int taper_degrees, int count,
                           const SphericalGrid& grid, const Vec3& center = Vec3::UnitZ());

/// Evaluates a zonal expansion about `center` on every grid direction.
Channel sample_zonal(const Eigen::VectorXd& coefficients, const SphericalGrid& grid,
                     const Vec3& center);

/// Pointwise product of a channel and a grid-sampled window.
Channel apply_taper(const Channel& channel, const Channel& taper);
Channel apply_taper(const Channel& channel, const TaperBank& bank, int index);

/// Averaged windowed correlation of two single channels over all tapers.
DegreeSeries multitaper_correlation(const Channel& f, const Channel& g, const TaperBank& bank,
                                    const SphericalGrid& grid, int degrees = 15);

struct FusionOptions {
  /// Compare modality power on standardized channels.
  bool standardize = true;
};

/// Per-taper spectra of one feature sphere: each modality is windowed and
/// transformed, then fused per degree.
struct TaperedSpectra {
  int degrees = 0;
  std::vector<std::array<Spectrum, kModalityCount>> modalities;  ///< [taper][modality]
  std::vector<Spectrum> fused;                                   ///< [taper]
};

/// Windowed transforms before fusion: raw spectra per taper and modality, and
/// the standardized spectra used to pick the fused modality (empty when
/// fusion does not standardize).
struct WindowedSpectra {
  int degrees = 0;
  std::vector<std::array<Spectrum, kModalityCount>> raw;
  std::vector<std::array<Spectrum, kModalityCount>> selection;
};

WindowedSpectra window_spectra(const FeatureSphere& sphere, const TaperBank& bank,
                               const SphericalGrid& grid, int degrees,
                               const FusionOptions& fusion = {});
TaperedSpectra fuse_windowed(WindowedSpectra windowed);

TaperedSpectra taper_spectra(const FeatureSphere& sphere, const TaperBank& bank,
                             const SphericalGrid& grid, int degrees,
                             const FusionOptions& fusion = {});

/// Average over tapers of the per-degree correlation of the fused spectra.
DegreeSeries multitaper_correlation(const TaperedSpectra& f, const TaperedSpectra& g);

DegreeSeries multitaper_correlation(const FeatureSphere& f, const FeatureSphere& g,
                                    const TaperBank& bank, int degrees = 15,
                                    const FusionOptions& fusion = {});

/// TAPR file: magic, u16 version, f64 cap half-angle, u16 L_h, u16 n, then
/// n * L_h f64 coefficients.
void save_taper_bank(const std::filesystem::path& path, const TaperBank& bank);
/// Loads coefficients and re-samples them on `grid`.
TaperBank load_taper_bank(const std::filesystem::path& path, const SphericalGrid& grid,
                          const Vec3& center = Vec3::UnitZ());

}  // namespace sphereloc
