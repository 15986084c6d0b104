#pragma once

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "sphereloc/sphere_grid.hpp"

namespace sphereloc {

using Complex = std::complex<double>;

/// Spherical harmonic coefficients of a real function for degrees [0, L).
///
/// Only orders m in [0, l] are stored; negative orders follow from
/// F(l, -m) = (-1)^m conj(F(l, m)).
class Spectrum {
 public:
  Spectrum() = default;
  explicit Spectrum(int degrees);

  int degrees() const { return degrees_; }
  std::size_t size() const { return coefficients_.size(); }

  static std::size_t index(int l, int m) {
    return static_cast<std::size_t>(l) * static_cast<std::size_t>(l + 1) / 2 +
           static_cast<std::size_t>(m);
  }
  static std::size_t count(int degrees) { return index(degrees, 0); }

  Complex& operator()(int l, int m) { return coefficients_[index(l, m)]; }
  const Complex& operator()(int l, int m) const { return coefficients_[index(l, m)]; }
  /// Any order in [-l, l].
  Complex coefficient(int l, int m) const;

  /// Coefficients of degree l, orders 0..l.
  std::span<Complex> row(int l) { return {coefficients_.data() + index(l, 0), static_cast<std::size_t>(l + 1)}; }
  std::span<const Complex> row(int l) const {
    return {coefficients_.data() + index(l, 0), static_cast<std::size_t>(l + 1)};
  }

  std::span<Complex> coefficients() { return coefficients_; }
  std::span<const Complex> coefficients() const { return coefficients_; }

  /// Leading degrees of this spectrum. Throws InvalidParameter if degrees > this->degrees().
  Spectrum truncated(int degrees) const;

  friend bool operator==(const Spectrum&, const Spectrum&) = default;

 private:
  int degrees_ = 0;
  std::vector<Complex> coefficients_;
};

/// Orthonormal associated Legendre values
/// sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!) P_l^m(cos theta) with Condon-Shortley
/// phase for l < degrees, m <= l, stored at Spectrum::index(l, m).
///
/// Uses the upward recurrence in l with an explicit binary exponent so that
/// sectoral seeds far below the double range do not flush to zero.
class LegendreRecurrence {
 public:
  explicit LegendreRecurrence(int degrees);
  int degrees() const { return degrees_; }
  void evaluate(double theta, std::span<double> out) const;

 private:
  int degrees_;
  std::vector<double> a_, b_;   // per (l, m) recurrence coefficients
  std::vector<double> sector_;  // sqrt((2m+1)/(2m))
};

/// Forward transform onto degrees [0, B).
Spectrum forward_sht(const Channel& channel, const SphericalGrid& grid);
/// Forward transform restricted to degrees [0, degrees), degrees <= B.
Spectrum forward_sht(const Channel& channel, const SphericalGrid& grid, int degrees);

/// Synthesises the real grid function. Requires spectrum.degrees() == grid.bandwidth().
Channel inverse_sht(const Spectrum& spectrum, const SphericalGrid& grid);

/// Coefficients of f(theta, phi - alpha): F(l, m) exp(-i m alpha).
Spectrum yaw_rotate(const Spectrum& spectrum, double alpha);

/// Debug dump: one "l m re im" line per stored coefficient, lexicographic in (l, m).
void write_spectrum_text(std::ostream& out, const Spectrum& spectrum);
Spectrum read_spectrum_text(std::istream& in);

}  // namespace sphereloc
