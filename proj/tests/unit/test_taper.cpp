#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include <boost/math/quadrature/gauss.hpp>
#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sphereloc/binary_io.hpp"
#include "sphereloc/errors.hpp"
#include "sphereloc/taper.hpp"

using namespace sphereloc;
using std::numbers::pi;

namespace {

Channel random_channel(const SphericalGrid& grid, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Channel c = grid.zeros();
  for (int j = 0; j < grid.samples(); ++j) {
    for (int k = 0; k < grid.samples(); ++k) c(j, k) = u(rng);
  }
  return c;
}

// Energy of a zonal expansion between cos(angle) = lo and hi, integrated in
// the angle to the axis with Gauss-Legendre quadrature.
double zonal_energy(const Eigen::VectorXd& c, double lo, double hi) {
  const auto h2 = [&](double x) {
    double v = 0.0;
    for (Eigen::Index l = 0; l < c.size(); ++l) v += c[l] * oracle::zonal(static_cast<int>(l), std::acos(x));
    return v * v;
  };
  return 2.0 * pi * boost::math::quadrature::gauss<double, 60>::integrate(h2, lo, hi);
}

}  // namespace

TEST(TaperBank, FullSphereSingleTaperIsConstant) {
  const SphericalGrid grid(16);
  const TaperBank bank = build_taper_bank(pi, 10, 1, grid);
  ASSERT_EQ(bank.size(), 1);
  EXPECT_NEAR(bank.concentrations[0], 1.0, 1e-8);
  const Channel& h = bank.sampled[0];
  EXPECT_LT((h.array() - 1.0 / (2.0 * std::sqrt(pi))).abs().maxCoeff(), 1e-12);
}

TEST(TaperBank, GramMatrixIsIdentity) {
  const SphericalGrid grid(32);
  for (const Vec3& center : {Vec3(Vec3::UnitZ()), Vec3(1.0, 0.0, 0.0), Vec3(0.3, -0.5, 0.2)}) {
    const TaperBank bank = build_taper_bank(pi / 6, 20, 3, grid, center);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        const double g = grid.inner_product(bank.sampled[i], bank.sampled[j]);
        EXPECT_NEAR(g, i == j ? 1.0 : 0.0, 1e-6) << i << "," << j;
      }
    }
  }
}

TEST(TaperBank, ConcentrationsMatchSpatialIntegration) {
  const SphericalGrid grid(24);
  const double cap = pi / 6;
  const TaperBank bank = build_taper_bank(cap, 20, 8, grid);
  for (int i = 0; i < bank.size(); ++i) {
    const double inside = zonal_energy(bank.coefficients[i], std::cos(cap), 1.0);
    const double total = zonal_energy(bank.coefficients[i], -1.0, 1.0);
    EXPECT_NEAR(inside / total, bank.concentrations[i], 1e-6) << "taper " << i;
  }
}

TEST(TaperBank, ConcentrationsSortedAndInUnitInterval) {
  const SphericalGrid grid(32);
  for (double cap : {0.1, pi / 6, 1.0, 2.5}) {
    const TaperBank bank = build_taper_bank(cap, 20, 20, grid);
    for (int i = 0; i < bank.size(); ++i) {
      EXPECT_GT(bank.concentrations[i], 0.0);
      EXPECT_LE(bank.concentrations[i], 1.0);
      if (i > 0) EXPECT_LE(bank.concentrations[i], bank.concentrations[i - 1]);
    }
  }
}

TEST(TaperBank, KernelIsSymmetricWithCapEnergyDiagonal) {
  const Eigen::MatrixXd d = cap_concentration_kernel(pi / 4, 12);
  EXPECT_LT((d - d.transpose()).cwiseAbs().maxCoeff(), 1e-14);
  // Each diagonal entry is the cap energy of one zonal harmonic.
  for (int l = 0; l < 12; ++l) {
    Eigen::VectorXd e = Eigen::VectorXd::Unit(12, l);
    EXPECT_NEAR(d(l, l), zonal_energy(e, std::cos(pi / 4), 1.0), 1e-10);
  }
}

TEST(TaperBank, ShannonCountIsClamped) {
  EXPECT_EQ(shannon_taper_count(pi / 6, 20), std::clamp(static_cast<int>(std::floor(441 * (1 - std::cos(pi / 6)) / 2)), 1, 8));
  EXPECT_EQ(shannon_taper_count(0.01, 2), 1);
  EXPECT_EQ(shannon_taper_count(pi, 40), kMaxShannonTapers);
}

TEST(TaperBank, RejectsInvalidParameters) {
  const SphericalGrid grid(32);
  EXPECT_THROW(build_taper_bank(pi / 6, 20, 21, grid), InvalidParameter);
  EXPECT_THROW(build_taper_bank(0.0, 20, 3, grid), InvalidParameter);
  EXPECT_THROW(build_taper_bank(4.0, 20, 3, grid), InvalidParameter);
  EXPECT_THROW(build_taper_bank(pi / 6, 40, 3, grid), InvalidParameter);
}

TEST(ApplyTaper, ConstantTaperScales) {
  const SphericalGrid grid(8);
  const Channel f = random_channel(grid, 1);
  const Channel c = Channel::Constant(16, 16, 0.25);
  EXPECT_LT((apply_taper(f, c) - 0.25 * f).cwiseAbs().maxCoeff(), 1e-16);
}

TEST(ApplyTaper, ZeroChannelStaysZero) {
  const SphericalGrid grid(16);
  const TaperBank bank = build_taper_bank(pi / 6, 10, 2, grid);
  EXPECT_TRUE((apply_taper(grid.zeros(), bank, 1).array() == 0.0).all());
}

TEST(ApplyTaper, WindowedPowerEqualsPowerOfPointwiseProduct) {
  const SphericalGrid grid(16);
  const TaperBank bank = build_taper_bank(pi / 6, 10, 2, grid);
  const Channel f = random_channel(grid, 2);
  Channel product = grid.zeros();
  for (int j = 0; j < 32; ++j) {
    for (int k = 0; k < 32; ++k) product(j, k) = f(j, k) * bank.sampled[1](j, k);
  }
  const auto a = power_spectrum(forward_sht(apply_taper(f, bank, 1), grid), 16);
  const auto b = power_spectrum(forward_sht(product, grid), 16);
  for (int l = 0; l < 16; ++l) EXPECT_EQ(a[l], b[l]);
}

TEST(ApplyTaper, ShapeMismatchThrows) {
  EXPECT_THROW(apply_taper(Channel::Zero(4, 4), Channel::Zero(4, 5)), ShapeError);
}

TEST(MultitaperCorrelation, SelfIsOneAndNegatedIsMinusOne) {
  const SphericalGrid grid(32);
  const Channel f = random_channel(grid, 3);
  for (int n : {1, 3, 6}) {
    const TaperBank bank = build_taper_bank(pi / 6, 20, n, grid);
    const auto same = multitaper_correlation(f, f, bank, grid, 15);
    const auto opposite = multitaper_correlation(f, Channel(-f), bank, grid, 15);
    for (int l = 0; l < 15; ++l) {
      EXPECT_NEAR(same[l], 1.0, 1e-12) << "n=" << n;
      EXPECT_NEAR(opposite[l], -1.0, 1e-12) << "n=" << n;
    }
  }
}

TEST(MultitaperCorrelation, FullSphereSingleTaperEqualsPlainCorrelation) {
  const SphericalGrid grid(32);
  const Channel f = random_channel(grid, 4);
  const Channel g = random_channel(grid, 5);
  const TaperBank bank = build_taper_bank(pi, 20, 1, grid);
  const auto windowed = multitaper_correlation(f, g, bank, grid, 15);
  const Spectrum F = forward_sht(f, grid, 15);
  const Spectrum G = forward_sht(g, grid, 15);
  const auto plain = degree_correlation(power_spectrum(F, 15), power_spectrum(G, 15), cross_power_spectrum(F, G, 15));
  for (int l = 0; l < 15; ++l) EXPECT_NEAR(windowed[l], plain[l], 1e-10);
}

TEST(MultitaperCorrelation, BoundedAndSymmetric) {
  const SphericalGrid grid(32);
  const TaperBank bank = build_taper_bank(pi / 6, 20, 4, grid);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Channel f = random_channel(grid, 10 + s);
    const Channel g = f + 0.5 * random_channel(grid, 20 + s);
    const auto fg = multitaper_correlation(f, g, bank, grid, 15);
    const auto gf = multitaper_correlation(g, f, bank, grid, 15);
    for (int l = 0; l < 15; ++l) {
      EXPECT_LE(std::abs(fg[l]), 1.0 + 1e-12);
      EXPECT_EQ(fg[l], gf[l]);
    }
  }
}

TEST(MultitaperCorrelation, FeatureSphereSelfCorrelationIsOne) {
  const SphericalGrid grid(32);
  const TaperBank bank = build_taper_bank(pi / 6, 20, 3, grid);
  const FeatureSphere fs = assemble_feature(random_channel(grid, 30), random_channel(grid, 31).cwiseAbs(),
                                            random_channel(grid, 32).cwiseAbs(), grid);
  for (double q : multitaper_correlation(fs, fs, bank, 15)) EXPECT_NEAR(q, 1.0, 1e-12);
}

TEST(MultitaperCorrelation, EmptyBankThrows) {
  const SphericalGrid grid(8);
  EXPECT_THROW(multitaper_correlation(grid.zeros(), grid.zeros(), TaperBank{}, grid, 5), InvalidParameter);
}

TEST(TaperFile, RoundTripAndErrors) {
  const SphericalGrid grid(32);
  const TaperBank bank = build_taper_bank(pi / 6, 20, 3, grid);
  const auto path = std::filesystem::temp_directory_path() / "sphereloc_test_bank.tapr";
  save_taper_bank(path, bank);
  EXPECT_TRUE(file_has_magic(path, "TAPR"));
  const TaperBank loaded = load_taper_bank(path, grid);
  ASSERT_EQ(loaded.size(), 3);
  EXPECT_EQ(loaded.cap_half_angle, bank.cap_half_angle);
  for (int i = 0; i < 3; ++i) {
    EXPECT_TRUE(loaded.coefficients[i] == bank.coefficients[i]);
    EXPECT_NEAR(loaded.concentrations[i], bank.concentrations[i], 1e-10);
  }

  auto bytes = read_file_bytes(path);
  bytes[4] = 9;  // version
  write_file_bytes(path, bytes);
  EXPECT_THROW(load_taper_bank(path, grid), UnsupportedVersion);
  bytes[4] = 1;
  bytes.resize(bytes.size() - 3);
  write_file_bytes(path, bytes);
  EXPECT_THROW(load_taper_bank(path, grid), FormatError);
  std::filesystem::remove(path);
}
