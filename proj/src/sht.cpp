#include "sphereloc/sht.hpp"

#include <cmath>
#include <istream>
#include <map>
#include <mutex>
#include <numbers>
#include <ostream>
#include <string>
#include <tuple>
#include <algorithm>

#include <fftw3.h>

#include "sphereloc/errors.hpp"

namespace sphereloc {

namespace {

/// FFTW plans shared across threads. Planning is serialised; executing a plan
/// on caller-owned buffers is thread-safe.
struct RingPlans {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
};

const RingPlans& ring_plans(int n) {
  static std::mutex mutex;
  static std::map<int, RingPlans> plans;
  std::lock_guard lock(mutex);
  auto it = plans.find(n);
  if (it != plans.end()) return it->second;
  std::vector<double> real(static_cast<std::size_t>(n));
  std::vector<Complex> spec(static_cast<std::size_t>(n / 2 + 1));
  auto* cplx = reinterpret_cast<fftw_complex*>(spec.data());
  RingPlans p;
  p.forward = fftw_plan_dft_r2c_1d(n, real.data(), cplx, FFTW_ESTIMATE | FFTW_UNALIGNED);
  p.backward = fftw_plan_dft_c2r_1d(n, cplx, real.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
  return plans.emplace(n, p).first->second;
}

void check_degrees(int degrees, const SphericalGrid& grid) {
  if (degrees < 1 || degrees > grid.bandwidth()) {
    throw InvalidParameter("transform degrees " + std::to_string(degrees) +
                           " outside [1, bandwidth " + std::to_string(grid.bandwidth()) + "]");
  }
}

constexpr int kExponentLimit = 400;

}  // namespace

Spectrum::Spectrum(int degrees) : degrees_(degrees) {
  if (degrees < 0) throw InvalidParameter("spectrum degrees must be non-negative");
  coefficients_.assign(count(degrees), Complex{});
}

Complex Spectrum::coefficient(int l, int m) const {
  if (m >= 0) return (*this)(l, m);
  const Complex c = std::conj((*this)(l, -m));
  return (-m) % 2 == 0 ? c : -c;
}

Spectrum Spectrum::truncated(int degrees) const {
  if (degrees < 0 || degrees > degrees_) {
    throw InvalidParameter("cannot truncate a spectrum of " + std::to_string(degrees_) +
                           " degrees to " + std::to_string(degrees));
  }
  Spectrum out(degrees);
  std::copy_n(coefficients_.begin(), out.size(), out.coefficients_.begin());
  return out;
}

LegendreRecurrence::LegendreRecurrence(int degrees) : degrees_(degrees) {
  const std::size_t n = Spectrum::count(degrees);
  a_.assign(n, 0.0);
  b_.assign(n, 0.0);
  sector_.assign(static_cast<std::size_t>(std::max(degrees, 1)), 0.0);
  for (int m = 1; m < degrees; ++m) sector_[m] = std::sqrt((2.0 * m + 1.0) / (2.0 * m));
  for (int m = 0; m < degrees; ++m) {
    for (int l = m + 1; l < degrees; ++l) {
      const double ll = l, mm = m;
      a_[Spectrum::index(l, m)] = std::sqrt((4.0 * ll * ll - 1.0) / (ll * ll - mm * mm));
      b_[Spectrum::index(l, m)] =
          std::sqrt(((ll - 1.0) * (ll - 1.0) - mm * mm) / (4.0 * (ll - 1.0) * (ll - 1.0) - 1.0));
    }
  }
}

void LegendreRecurrence::evaluate(double theta, std::span<double> out) const {
  const double x = std::cos(theta);
  const double s = std::sin(theta);
  // Sectoral seed lambda_mm = mantissa * 2^exponent.
  double mantissa = 1.0 / std::sqrt(4.0 * std::numbers::pi);
  int exponent = 0;
  for (int m = 0; m < degrees_; ++m) {
    if (m > 0) {
      mantissa *= -sector_[m] * s;
      int e = 0;
      mantissa = std::frexp(mantissa, &e);
      exponent += e;
    }
    double prev = 0.0;
    double cur = mantissa;
    int scale = exponent;
    out[Spectrum::index(m, m)] = std::ldexp(cur, scale);
    for (int l = m + 1; l < degrees_; ++l) {
      const std::size_t idx = Spectrum::index(l, m);
      const double next = a_[idx] * (x * cur - b_[idx] * prev);
      prev = cur;
      cur = next;
      if (cur != 0.0) {
        int e = 0;
        std::frexp(cur, &e);
        if (e > kExponentLimit || e < -kExponentLimit) {
          cur = std::ldexp(cur, -e);
          prev = std::ldexp(prev, -e);
          scale += e;
        }
      }
      out[idx] = std::ldexp(cur, scale);
    }
  }
}

Spectrum forward_sht(const Channel& channel, const SphericalGrid& grid) {
  return forward_sht(channel, grid, grid.bandwidth());
}

Spectrum forward_sht(const Channel& channel, const SphericalGrid& grid, int degrees) {
  if (!grid.matches(channel)) {
    throw ShapeError("channel of shape " + std::to_string(channel.rows()) + "x" +
                     std::to_string(channel.cols()) + " does not match grid");
  }
  check_degrees(degrees, grid);
  const int n = grid.samples();
  const RingPlans& plans = ring_plans(n);
  const LegendreRecurrence legendre(degrees);

  Spectrum out(degrees);
  std::vector<double> ring(static_cast<std::size_t>(n));
  std::vector<Complex> fourier(static_cast<std::size_t>(n / 2 + 1));
  std::vector<double> lambda(Spectrum::count(degrees));
  auto coeffs = out.coefficients();

  for (int j = 0; j < n; ++j) {
    const double w = grid.weight(j) * grid.azimuth_step();
    if (w == 0.0) continue;
    std::copy_n(channel.row(j).data(), n, ring.begin());
    fftw_execute_dft_r2c(plans.forward, ring.data(), reinterpret_cast<fftw_complex*>(fourier.data()));
    legendre.evaluate(grid.colatitude(j), lambda);
    for (int m = 0; m < degrees; ++m) {
      const Complex c = w * fourier[static_cast<std::size_t>(m)];
      for (int l = m; l < degrees; ++l) {
        const std::size_t idx = Spectrum::index(l, m);
        coeffs[idx] += c * lambda[idx];
      }
    }
  }
  return out;
}

Channel inverse_sht(const Spectrum& spec, const SphericalGrid& grid) {
  if (spec.degrees() != grid.bandwidth()) {
    throw ShapeError("spectrum of " + std::to_string(spec.degrees()) +
                     " degrees does not match grid bandwidth " + std::to_string(grid.bandwidth()));
  }
  const int degrees = spec.degrees();
  const int n = grid.samples();
  const RingPlans& plans = ring_plans(n);
  const LegendreRecurrence legendre(degrees);

  Channel out = grid.zeros();
  std::vector<double> ring(static_cast<std::size_t>(n));
  std::vector<Complex> fourier(static_cast<std::size_t>(n / 2 + 1));
  std::vector<double> lambda(Spectrum::count(degrees));
  const auto coeffs = spec.coefficients();

  for (int j = 0; j < n; ++j) {
    legendre.evaluate(grid.colatitude(j), lambda);
    std::fill(fourier.begin(), fourier.end(), Complex{});
    for (int m = 0; m < degrees; ++m) {
      Complex g{};
      for (int l = m; l < degrees; ++l) {
        const std::size_t idx = Spectrum::index(l, m);
        g += coeffs[idx] * lambda[idx];
      }
      fourier[static_cast<std::size_t>(m)] = g;
    }
    // c2r evaluates X_0 + 2 Re sum_{m>0} X_m e^{i m phi}, which is the sum
    // over +-m under conjugate symmetry.
    fftw_execute_dft_c2r(plans.backward, reinterpret_cast<fftw_complex*>(fourier.data()), ring.data());
    std::copy_n(ring.begin(), n, out.row(j).data());
  }
  return out;
}

Spectrum yaw_rotate(const Spectrum& spec, double alpha) {
  Spectrum out = spec;
  for (int m = 0; m < spec.degrees(); ++m) {
    const Complex phase = std::polar(1.0, -m * alpha);
    for (int l = m; l < spec.degrees(); ++l) out(l, m) *= phase;
  }
  return out;
}

void write_spectrum_text(std::ostream& out, const Spectrum& spec) {
  const auto precision = out.precision(17);
  for (int l = 0; l < spec.degrees(); ++l) {
    for (int m = 0; m <= l; ++m) {
      out << l << ' ' << m << ' ' << spec(l, m).real() << ' ' << spec(l, m).imag() << '\n';
    }
  }
  out.precision(precision);
}

Spectrum read_spectrum_text(std::istream& in) {
  std::vector<std::tuple<int, int, double, double>> rows;
  int l = 0, m = 0;
  double re = 0.0, im = 0.0;
  int max_l = -1;
  while (in >> l >> m >> re >> im) {
    if (l < 0 || m < 0 || m > l) throw FormatError("invalid degree/order in spectrum dump", rows.size());
    rows.emplace_back(l, m, re, im);
    max_l = std::max(max_l, l);
  }
  Spectrum out(max_l + 1);
  for (const auto& [ll, mm, r, i] : rows) out(ll, mm) = Complex(r, i);
  return out;
}

}  // namespace sphereloc
