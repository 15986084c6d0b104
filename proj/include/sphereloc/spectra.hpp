#pragma once

#include <span>
#include <vector>

#include "sphereloc/sht.hpp"

namespace sphereloc {

/// Per-degree real series (power, correlation, confidence).
using DegreeSeries = std::vector<double>;
/// Per-degree complex series (cross-power).
using ComplexDegreeSeries = std::vector<Complex>;

/// Products S_ff * S_gg below this count as zero power.
inline constexpr double kDegeneratePower = 1e-12;

/// S(l) = sum_{m=0}^{l} |F_lm|^2 for l < degrees.
DegreeSeries power_spectrum(const Spectrum& f, int degrees);

/// S_fg(l) = sum_{m=0}^{l} F_lm conj(G_lm) for l < degrees.
ComplexDegreeSeries cross_power_spectrum(const Spectrum& f, const Spectrum& g, int degrees);

/// Q(l) = Re S_fg(l) / sqrt(S_ff(l) S_gg(l)), clamped to [-1, 1] against rounding;
/// zero where the power product is degenerate.
DegreeSeries degree_correlation(const DegreeSeries& sff, const DegreeSeries& sgg,
                                const ComplexDegreeSeries& sfg);

/// For each degree, the index of the modality with the largest power. Ties go
/// to the lowest index.
std::vector<int> fusion_selection(std::span<const DegreeSeries> powers, int degrees);

/// Row-wise fusion where the selection power is taken from the spectra themselves.
Spectrum fuse_spectra(std::span<const Spectrum> spectra, int degrees);

/// Row-wise fusion: degree l of the result is copied from spectra[i] where i
/// maximises the power of selection[i] at l. Throws InvalidParameter on an
/// empty list, ShapeError on mismatched counts or bandwidths.
Spectrum fuse_spectra(std::span<const Spectrum> spectra, std::span<const Spectrum> selection,
                      int degrees);

/// Copies rows according to a precomputed selection.
Spectrum fuse_rows(std::span<const Spectrum> spectra, std::span<const int> selection, int degrees);

}  // namespace sphereloc
