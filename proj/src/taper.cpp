#include "sphereloc/taper.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>

#include "sphereloc/binary_io.hpp"
#include "sphereloc/errors.hpp"
#include "sphereloc/sht.hpp"

namespace sphereloc {

using std::numbers::pi;

namespace {

constexpr std::uint16_t kTaperFormatVersion = 1;

/// Orthonormal zonal harmonics sqrt((2l+1)/(4 pi)) P_l(x) for l < degrees.
void zonal_harmonics(double x, int degrees, double* out) {
  double p_prev = 1.0;  // P_0
  double p_cur = x;     // P_1
  for (int l = 0; l < degrees; ++l) {
    double p = 0.0;
    if (l == 0) {
      p = 1.0;
    } else if (l == 1) {
      p = x;
    } else {
      const double next = ((2.0 * l - 1.0) * x * p_cur - (l - 1.0) * p_prev) / l;
      p_prev = p_cur;
      p_cur = next;
      p = next;
    }
    out[l] = std::sqrt((2.0 * l + 1.0) / (4.0 * pi)) * p;
  }
}

/// Gauss-Legendre nodes and weights on [-1, 1] (Golub-Welsch).
void gauss_legendre(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double beta = k / std::sqrt(4.0 * k * k - 1.0);
    jacobi(k, k - 1) = beta;
    jacobi(k - 1, k) = beta;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  nodes = solver.eigenvalues();
  weights = 2.0 * solver.eigenvectors().row(0).transpose().array().square();
}

double value_at_center(const Eigen::VectorXd& c) {
  double v = 0.0;
  for (Eigen::Index l = 0; l < c.size(); ++l) v += c[l] * std::sqrt((2.0 * l + 1.0) / (4.0 * pi));
  return v;
}

void check_bank(const TaperBank& bank, const SphericalGrid& grid) {
  if (bank.empty()) throw InvalidParameter("taper bank is empty");
  if (bank.grid_bandwidth != grid.bandwidth()) {
    throw ShapeError("taper bank sampled for bandwidth " + std::to_string(bank.grid_bandwidth) +
                     ", grid has " + std::to_string(grid.bandwidth()));
  }
}

}  // namespace

int shannon_taper_count(double cap_half_angle, int taper_degrees) {
  const double area_fraction = (1.0 - std::cos(cap_half_angle)) / 2.0;
  const double shannon = (taper_degrees + 1.0) * (taper_degrees + 1.0) * area_fraction;
  return std::clamp(static_cast<int>(std::floor(shannon)), 1, kMaxShannonTapers);
}

Eigen::MatrixXd cap_concentration_kernel(double cap_half_angle, int taper_degrees) {
  if (taper_degrees < 1) throw InvalidParameter("taper bandwidth must be at least 1");
  if (cap_half_angle >= pi) return Eigen::MatrixXd::Identity(taper_degrees, taper_degrees);

  // Integrand is a polynomial of degree 2 (L_h - 1) in x = cos(theta).
  const int n = taper_degrees + 1;
  Eigen::VectorXd nodes, weights;
  gauss_legendre(n, nodes, weights);
  const double lo = std::cos(cap_half_angle);
  const double half = (1.0 - lo) / 2.0;

  Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(taper_degrees, taper_degrees);
  Eigen::VectorXd y(taper_degrees);
  for (int q = 0; q < n; ++q) {
    const double x = lo + half * (nodes[q] + 1.0);
    zonal_harmonics(x, taper_degrees, y.data());
    kernel.noalias() += (2.0 * pi * half * weights[q]) * y * y.transpose();
  }
  return kernel;
}

Channel sample_zonal(const Eigen::VectorXd& coefficients, const SphericalGrid& grid,
                     const Vec3& center) {
  const int degrees = static_cast<int>(coefficients.size());
  const Vec3 axis = center.normalized();
  Channel out = grid.zeros();
  std::vector<double> y(static_cast<std::size_t>(degrees));
  for (int j = 0; j < grid.samples(); ++j) {
    for (int k = 0; k < grid.samples(); ++k) {
      const double x = std::clamp(axis.dot(grid.direction(j, k)), -1.0, 1.0);
      zonal_harmonics(x, degrees, y.data());
      double v = 0.0;
      for (int l = 0; l < degrees; ++l) v += coefficients[l] * y[l];
      out(j, k) = v;
    }
  }
  return out;
}

TaperBank build_taper_bank(double cap_half_angle, int taper_degrees, int count,
                           const SphericalGrid& grid, const Vec3& center) {
  if (!(cap_half_angle > 0.0) || cap_half_angle > pi) {
    throw InvalidParameter("cap half-angle must lie in (0, pi]");
  }
  if (taper_degrees < 1) throw InvalidParameter("taper bandwidth must be at least 1");
  if (count < 1 || count > taper_degrees) {
    throw InvalidParameter("taper count " + std::to_string(count) + " outside [1, L_h = " +
                           std::to_string(taper_degrees) + "]");
  }
  if (taper_degrees > grid.bandwidth()) {
    throw InvalidParameter("taper bandwidth " + std::to_string(taper_degrees) +
                           " exceeds grid bandwidth " + std::to_string(grid.bandwidth()));
  }

  TaperBank bank;
  bank.cap_half_angle = cap_half_angle;
  bank.taper_degrees = taper_degrees;
  bank.center = center.normalized();
  bank.grid_bandwidth = grid.bandwidth();

  if (cap_half_angle >= pi) {
    // Every band-limited function is fully concentrated; use the degree basis.
    for (int i = 0; i < count; ++i) {
      bank.coefficients.push_back(Eigen::VectorXd::Unit(taper_degrees, i));
      bank.concentrations.push_back(1.0);
    }
  } else {
    const Eigen::MatrixXd kernel = cap_concentration_kernel(cap_half_angle, taper_degrees);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(kernel);
    const auto& values = solver.eigenvalues();
    std::vector<int> order(static_cast<std::size_t>(taper_degrees));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return values[a] > values[b]; });
    for (int i = 0; i < count; ++i) {
      Eigen::VectorXd c = solver.eigenvectors().col(order[i]);
      double sign_ref = value_at_center(c);
      if (std::abs(sign_ref) < 1e-12) {
        Eigen::Index lead = 0;
        c.cwiseAbs().maxCoeff(&lead);
        sign_ref = c[lead];
      }
      if (sign_ref < 0.0) c = -c;
      bank.coefficients.push_back(std::move(c));
      bank.concentrations.push_back(
          std::clamp(values[order[i]], std::numeric_limits<double>::min(), 1.0));
    }
  }
  for (const auto& c : bank.coefficients) bank.sampled.push_back(sample_zonal(c, grid, bank.center));
  return bank;
}

Channel apply_taper(const Channel& channel, const Channel& taper) {
  if (channel.rows() != taper.rows() || channel.cols() != taper.cols()) {
    throw ShapeError("taper and channel shapes differ");
  }
  return channel.cwiseProduct(taper);
}

Channel apply_taper(const Channel& channel, const TaperBank& bank, int index) {
  return apply_taper(channel, bank.sampled.at(static_cast<std::size_t>(index)));
}

DegreeSeries multitaper_correlation(const Channel& f, const Channel& g, const TaperBank& bank,
                                    const SphericalGrid& grid, int degrees) {
  check_bank(bank, grid);
  if (!grid.matches(f) || !grid.matches(g)) throw ShapeError("channels do not match grid");
  DegreeSeries mean(static_cast<std::size_t>(degrees), 0.0);
  for (int i = 0; i < bank.size(); ++i) {
    const Spectrum fs = forward_sht(apply_taper(f, bank, i), grid, degrees);
    const Spectrum gs = forward_sht(apply_taper(g, bank, i), grid, degrees);
    const DegreeSeries q = degree_correlation(power_spectrum(fs, degrees), power_spectrum(gs, degrees),
                                              cross_power_spectrum(fs, gs, degrees));
    for (int l = 0; l < degrees; ++l) mean[l] += q[l];
  }
  for (double& v : mean) v /= bank.size();
  return mean;
}

WindowedSpectra window_spectra(const FeatureSphere& sphere, const TaperBank& bank,
                               const SphericalGrid& grid, int degrees, const FusionOptions& fusion) {
  check_bank(bank, grid);
  if (sphere.bandwidth() != grid.bandwidth()) throw ShapeError("feature sphere does not match grid");

  std::array<Channel, kModalityCount> standardized;
  if (fusion.standardize) {
    for (int m = 0; m < kModalityCount; ++m) standardized[m] = standardize(sphere.channels()[m]);
  }

  WindowedSpectra out;
  out.degrees = degrees;
  out.raw.resize(static_cast<std::size_t>(bank.size()));
  if (fusion.standardize) out.selection.resize(static_cast<std::size_t>(bank.size()));
  for (int i = 0; i < bank.size(); ++i) {
    for (int m = 0; m < kModalityCount; ++m) {
      out.raw[i][m] = forward_sht(apply_taper(sphere.channels()[m], bank, i), grid, degrees);
      if (fusion.standardize) {
        out.selection[i][m] = forward_sht(apply_taper(standardized[m], bank, i), grid, degrees);
      }
    }
  }
  return out;
}

TaperedSpectra fuse_windowed(WindowedSpectra windowed) {
  TaperedSpectra out;
  out.degrees = windowed.degrees;
  out.fused.reserve(windowed.raw.size());
  for (std::size_t i = 0; i < windowed.raw.size(); ++i) {
    const auto& selection = windowed.selection.empty() ? windowed.raw[i] : windowed.selection[i];
    out.fused.push_back(fuse_spectra(windowed.raw[i], selection, windowed.degrees));
  }
  out.modalities = std::move(windowed.raw);
  return out;
}

TaperedSpectra taper_spectra(const FeatureSphere& sphere, const TaperBank& bank,
                             const SphericalGrid& grid, int degrees, const FusionOptions& fusion) {
  return fuse_windowed(window_spectra(sphere, bank, grid, degrees, fusion));
}

DegreeSeries multitaper_correlation(const TaperedSpectra& f, const TaperedSpectra& g) {
  if (f.fused.size() != g.fused.size() || f.degrees != g.degrees) {
    throw ShapeError("tapered spectra were built with different banks");
  }
  if (f.fused.empty()) throw InvalidParameter("taper bank is empty");
  const int degrees = f.degrees;
  DegreeSeries mean(static_cast<std::size_t>(degrees), 0.0);
  for (std::size_t i = 0; i < f.fused.size(); ++i) {
    const DegreeSeries q =
        degree_correlation(power_spectrum(f.fused[i], degrees), power_spectrum(g.fused[i], degrees),
                           cross_power_spectrum(f.fused[i], g.fused[i], degrees));
    for (int l = 0; l < degrees; ++l) mean[l] += q[l];
  }
  for (double& v : mean) v /= static_cast<double>(f.fused.size());
  return mean;
}

DegreeSeries multitaper_correlation(const FeatureSphere& f, const FeatureSphere& g,
                                    const TaperBank& bank, int degrees, const FusionOptions& fusion) {
  const SphericalGrid grid(f.bandwidth());
  return multitaper_correlation(taper_spectra(f, bank, grid, degrees, fusion),
                                taper_spectra(g, bank, grid, degrees, fusion));
}

void save_taper_bank(const std::filesystem::path& path, const TaperBank& bank) {
  ByteWriter w;
  w.magic("TAPR");
  w.u16(kTaperFormatVersion);
  w.f64(bank.cap_half_angle);
  w.u16(static_cast<std::uint16_t>(bank.taper_degrees));
  w.u16(static_cast<std::uint16_t>(bank.size()));
  for (const auto& c : bank.coefficients) {
    for (Eigen::Index l = 0; l < c.size(); ++l) w.f64(c[l]);
  }
  write_file_bytes(path, w.bytes());
}

TaperBank load_taper_bank(const std::filesystem::path& path, const SphericalGrid& grid,
                          const Vec3& center) {
  const auto bytes = read_file_bytes(path);
  ByteReader r(bytes);
  r.expect_magic("TAPR");
  const std::size_t version_at = r.offset();
  const auto version = r.u16();
  if (version != kTaperFormatVersion) throw UnsupportedVersion(version, version_at);
  TaperBank bank;
  bank.cap_half_angle = r.f64();
  bank.taper_degrees = r.u16();
  const int count = r.u16();
  bank.center = center.normalized();
  bank.grid_bandwidth = grid.bandwidth();
  r.require(static_cast<std::size_t>(count) * bank.taper_degrees * 8, "truncated taper coefficients");
  const Eigen::MatrixXd kernel = cap_concentration_kernel(bank.cap_half_angle, bank.taper_degrees);
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXd c(bank.taper_degrees);
    for (int l = 0; l < bank.taper_degrees; ++l) c[l] = r.f64();
    bank.concentrations.push_back(
        std::clamp(c.dot(kernel * c), std::numeric_limits<double>::min(), 1.0));
    bank.sampled.push_back(sample_zonal(c, grid, bank.center));
    bank.coefficients.push_back(std::move(c));
  }
  return bank;
}

}  // namespace sphereloc
