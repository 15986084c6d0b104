#include "sphereloc/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sphereloc/errors.hpp"

namespace sphereloc {

namespace {

void check_eval_degrees(const Spectrum& f, int degrees) {
  if (degrees < 0 || degrees > f.degrees()) {
    throw InvalidParameter("evaluation degrees " + std::to_string(degrees) +
                           " exceed spectrum bandwidth " + std::to_string(f.degrees()));
  }
}

}  // namespace

DegreeSeries power_spectrum(const Spectrum& f, int degrees) {
  check_eval_degrees(f, degrees);
  DegreeSeries s(static_cast<std::size_t>(degrees), 0.0);
  for (int l = 0; l < degrees; ++l) {
    double sum = 0.0;
    for (const Complex& c : f.row(l)) sum += c.real() * c.real() + c.imag() * c.imag();
    s[l] = sum;
  }
  return s;
}

ComplexDegreeSeries cross_power_spectrum(const Spectrum& f, const Spectrum& g, int degrees) {
  if (f.degrees() != g.degrees()) {
    throw ShapeError("cross power of spectra with " + std::to_string(f.degrees()) + " and " +
                     std::to_string(g.degrees()) + " degrees");
  }
  check_eval_degrees(f, degrees);
  ComplexDegreeSeries s(static_cast<std::size_t>(degrees));
  for (int l = 0; l < degrees; ++l) {
    const auto fr = f.row(l);
    const auto gr = g.row(l);
    Complex sum{};
    for (int m = 0; m <= l; ++m) sum += fr[m] * std::conj(gr[m]);
    s[l] = sum;
  }
  return s;
}

DegreeSeries degree_correlation(const DegreeSeries& sff, const DegreeSeries& sgg,
                                const ComplexDegreeSeries& sfg) {
  if (sff.size() != sgg.size() || sff.size() != sfg.size()) {
    throw ShapeError("correlation inputs have different lengths");
  }
  DegreeSeries q(sff.size(), 0.0);
  for (std::size_t l = 0; l < q.size(); ++l) {
    const double product = sff[l] * sgg[l];
    if (product < kDegeneratePower) continue;
    q[l] = std::clamp(sfg[l].real() / std::sqrt(product), -1.0, 1.0);
  }
  return q;
}

std::vector<int> fusion_selection(std::span<const DegreeSeries> powers, int degrees) {
  if (powers.empty()) throw InvalidParameter("fusion needs at least one modality");
  std::vector<int> pick(static_cast<std::size_t>(degrees), 0);
  for (int l = 0; l < degrees; ++l) {
    double best = powers[0].at(l);
    for (std::size_t i = 1; i < powers.size(); ++i) {
      if (powers[i].at(l) > best) {
        best = powers[i][l];
        pick[l] = static_cast<int>(i);
      }
    }
  }
  return pick;
}

Spectrum fuse_rows(std::span<const Spectrum> spectra, std::span<const int> selection, int degrees) {
  if (spectra.empty()) throw InvalidParameter("fusion needs at least one modality");
  for (const auto& s : spectra) {
    if (s.degrees() != spectra[0].degrees()) throw ShapeError("fused spectra differ in bandwidth");
  }
  check_eval_degrees(spectra[0], degrees);
  Spectrum out(degrees);
  for (int l = 0; l < degrees; ++l) {
    const auto src = spectra[static_cast<std::size_t>(selection[l])].row(l);
    std::copy(src.begin(), src.end(), out.row(l).begin());
  }
  return out;
}

Spectrum fuse_spectra(std::span<const Spectrum> spectra, int degrees) {
  return fuse_spectra(spectra, spectra, degrees);
}

Spectrum fuse_spectra(std::span<const Spectrum> spectra, std::span<const Spectrum> selection,
                      int degrees) {
  if (spectra.empty()) throw InvalidParameter("fusion needs at least one modality");
  if (selection.size() != spectra.size()) {
    throw ShapeError("fusion selection spectra do not match the modality count");
  }
  std::vector<DegreeSeries> powers;
  powers.reserve(selection.size());
  for (const auto& s : selection) powers.push_back(power_spectrum(s, degrees));
  return fuse_rows(spectra, fusion_selection(powers, degrees), degrees);
}

}  // namespace sphereloc
