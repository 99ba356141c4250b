#pragma once

// Core spectral types and the closed-form extinction mathematics.
//
// Conventions used throughout the project:
//  - wavelengths are stored in Angstrom,
//  - extinction formulas operate on inverse wavelength x in 1/um,
//    converted as x = 1e4 / lambda[A] (2175 A <-> x0 = 4.59 1/um),
//  - extinction is applied multiplicatively as 10^(-0.4 * A), A in magnitudes,
//  - all math in 64-bit floats.

#include <cstddef>
#include <filesystem>
#include <vector>

namespace bump::spectra {

inline double inv_um_from_angstrom(double lambda_angstrom) {
    return 1e4 / lambda_angstrom;
}

// Uniform wavelength grid, endpoints inclusive.
struct WavelengthGrid {
    double min_angstrom = 3800.0;
    double max_angstrom = 9200.0;
    std::size_t count = 4600;

    std::vector<double> wavelengths() const;
};

// Default observed-frame grid: SDSS-like coverage, ~4600 pixels per file.
inline constexpr WavelengthGrid kDefaultObservedGrid{3800.0, 9200.0, 4600};

// Ordered (wavelength, flux) samples. Construction validates:
// equal lengths >= 2, strictly increasing positive wavelengths, finite fluxes.
class Spectrum {
public:
    Spectrum(std::vector<double> wavelengths, std::vector<double> fluxes);

    std::size_t size() const { return wavelengths_.size(); }
    const std::vector<double>& wavelengths() const { return wavelengths_; }
    const std::vector<double>& fluxes() const { return fluxes_; }

    double min_wavelength() const { return wavelengths_.front(); }
    double max_wavelength() const { return wavelengths_.back(); }

    // Linear interpolation; lambda must lie inside [min, max].
    double flux_at(double lambda_angstrom) const;

private:
    std::vector<double> wavelengths_;
    std::vector<double> fluxes_;
};

// Drude bump profile: peak position x0 and FWHM gamma in 1/um, amplitude c3.
struct BumpProfile {
    double x0 = 4.59;
    double gamma = 1.0;
    double c3 = 0.0;
};

void validate(const BumpProfile& p);

// A(x) = c1 + c2 x + c3 D(x; x0, gamma), magnitudes.
struct ExtinctionParams {
    double c1 = 0.0;
    double c2 = 0.0;
    BumpProfile bump;
};

void validate(const ExtinctionParams& p);

// D(x) = x^2 / ((x^2 - x0^2)^2 + x^2 gamma^2); peak 1/gamma^2 at x = x0.
double drude(double x, double x0, double gamma);

double extinction(double x, const ExtinctionParams& params);

// Bump strength as the profile area: A_bump = pi c3 / (2 gamma).
double bump_area(double c3, double gamma);
double c3_from_area(double a_bump, double gamma);

// Redden a rest-frame spectrum onto an observed-frame grid.
// For each observed lambda:
//   flux = rest_flux(lambda / (1 + z_em)) * 10^(-0.4 A(x)),
//   x = 1e4 (1 + z_abs) / lambda   (absorber-frame inverse wavelength).
// Observed wavelengths outside the redshifted rest coverage get flux 0;
// an empty overlap is an error. Rest flux is linearly interpolated.
Spectrum apply_extinction(const Spectrum& rest, const ExtinctionParams& params,
                          double z_abs, double z_em,
                          const std::vector<double>& observed_wavelengths);
Spectrum apply_extinction(const Spectrum& rest, const ExtinctionParams& params,
                          double z_abs, double z_em,
                          const WavelengthGrid& grid = kDefaultObservedGrid);

// Plain ASCII spectrum files: one "wavelength flux" pair per line, '#' lines
// ignored, wavelengths in Angstrom. The writer emits 9 significant digits.
Spectrum read_spectrum(const std::filesystem::path& path);
void write_spectrum(const Spectrum& s, const std::filesystem::path& path);

}  // namespace bump::spectra
