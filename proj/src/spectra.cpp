#include "bump/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "bump/errors.hpp"

namespace bump::spectra {

std::vector<double> WavelengthGrid::wavelengths() const {
    if (count < 2 || !(min_angstrom < max_angstrom) || !(min_angstrom > 0.0)) {
        throw std::invalid_argument("WavelengthGrid: need count >= 2 and 0 < min < max");
    }
    std::vector<double> w(count);
    const double step = (max_angstrom - min_angstrom) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) {
        w[i] = min_angstrom + static_cast<double>(i) * step;
    }
    w.back() = max_angstrom;
    return w;
}

Spectrum::Spectrum(std::vector<double> wavelengths, std::vector<double> fluxes)
    : wavelengths_(std::move(wavelengths)), fluxes_(std::move(fluxes)) {
    if (wavelengths_.size() != fluxes_.size()) {
        throw std::invalid_argument("Spectrum: wavelength/flux length mismatch");
    }
    if (wavelengths_.size() < 2) {
        throw std::invalid_argument("Spectrum: need at least 2 samples");
    }
    for (std::size_t i = 0; i < wavelengths_.size(); ++i) {
        if (!(wavelengths_[i] > 0.0) || !std::isfinite(wavelengths_[i])) {
            throw std::invalid_argument("Spectrum: wavelengths must be positive and finite");
        }
        if (i > 0 && !(wavelengths_[i] > wavelengths_[i - 1])) {
            throw std::invalid_argument("Spectrum: wavelengths must be strictly increasing");
        }
        if (!std::isfinite(fluxes_[i])) {
            throw std::invalid_argument("Spectrum: fluxes must be finite");
        }
    }
}

double Spectrum::flux_at(double lambda) const {
    if (lambda < wavelengths_.front() || lambda > wavelengths_.back()) {
        throw std::invalid_argument("Spectrum::flux_at: wavelength outside coverage");
    }
    auto it = std::lower_bound(wavelengths_.begin(), wavelengths_.end(), lambda);
    std::size_t hi = static_cast<std::size_t>(it - wavelengths_.begin());
    if (hi == 0) return fluxes_.front();
    std::size_t lo = hi - 1;
    const double t = (lambda - wavelengths_[lo]) / (wavelengths_[hi] - wavelengths_[lo]);
    return fluxes_[lo] + t * (fluxes_[hi] - fluxes_[lo]);
}

void validate(const BumpProfile& p) {
    if (!(p.x0 > 0.0) || !std::isfinite(p.x0)) {
        throw std::invalid_argument("BumpProfile: x0 must be positive and finite");
    }
    if (!(p.gamma > 0.0) || !std::isfinite(p.gamma)) {
        throw std::invalid_argument("BumpProfile: gamma must be positive and finite");
    }
    if (!(p.c3 >= 0.0) || !std::isfinite(p.c3)) {
        throw std::invalid_argument("BumpProfile: c3 must be >= 0 and finite");
    }
}

void validate(const ExtinctionParams& p) {
    if (!std::isfinite(p.c1) || !std::isfinite(p.c2)) {
        throw std::invalid_argument("ExtinctionParams: c1, c2 must be finite");
    }
    validate(p.bump);
}

double drude(double x, double x0, double gamma) {
    if (!(x0 > 0.0) || !std::isfinite(x0) || !(gamma > 0.0) || !std::isfinite(gamma)) {
        throw std::invalid_argument("drude: x0 and gamma must be positive and finite");
    }
    if (!(x >= 0.0)) {
        throw std::invalid_argument("drude: x must be >= 0");
    }
    const double x2 = x * x;
    const double d = x2 - x0 * x0;
    return x2 / (d * d + x2 * gamma * gamma);
}

double extinction(double x, const ExtinctionParams& params) {
    validate(params);
    return params.c1 + params.c2 * x +
           params.bump.c3 * drude(x, params.bump.x0, params.bump.gamma);
}

double bump_area(double c3, double gamma) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
        throw std::invalid_argument("bump_area: gamma must be positive");
    }
    return std::numbers::pi * c3 / (2.0 * gamma);
}

double c3_from_area(double a_bump, double gamma) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
        throw std::invalid_argument("c3_from_area: gamma must be positive");
    }
    return 2.0 * gamma * a_bump / std::numbers::pi;
}

Spectrum apply_extinction(const Spectrum& rest, const ExtinctionParams& params,
                          double z_abs, double z_em,
                          const std::vector<double>& observed_wavelengths) {
    validate(params);
    if (!(z_abs >= 0.0) || !(z_em >= z_abs)) {
        throw std::invalid_argument("apply_extinction: need 0 <= z_abs <= z_em");
    }
    const double rest_scale = 1.0 / (1.0 + z_em);
    const double abs_scale = 1.0 + z_abs;

    std::vector<double> flux(observed_wavelengths.size(), 0.0);
    std::size_t covered = 0;
    for (std::size_t i = 0; i < observed_wavelengths.size(); ++i) {
        const double lam_obs = observed_wavelengths[i];
        const double lam_rest = lam_obs * rest_scale;
        if (lam_rest < rest.min_wavelength() || lam_rest > rest.max_wavelength()) {
            continue;
        }
        ++covered;
        const double x = 1e4 * abs_scale / lam_obs;
        const double a_mag = extinction(x, params);
        flux[i] = rest.flux_at(lam_rest) * std::pow(10.0, -0.4 * a_mag);
    }
    if (covered == 0) {
        throw std::invalid_argument(
            "apply_extinction: observed grid has no overlap with redshifted rest coverage");
    }
    return Spectrum(observed_wavelengths, std::move(flux));
}

Spectrum apply_extinction(const Spectrum& rest, const ExtinctionParams& params,
                          double z_abs, double z_em, const WavelengthGrid& grid) {
    return apply_extinction(rest, params, z_abs, z_em, grid.wavelengths());
}

Spectrum read_spectrum(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw io_error("cannot open spectrum file: " + path.string());
    }
    std::vector<double> w, f;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        double wl = 0.0, fl = 0.0;
        if (!(ls >> wl >> fl)) {
            throw io_error(path.string() + ":" + std::to_string(lineno) +
                           ": expected 'wavelength flux'");
        }
        w.push_back(wl);
        f.push_back(fl);
    }
    try {
        return Spectrum(std::move(w), std::move(f));
    } catch (const std::invalid_argument& e) {
        throw io_error(path.string() + ": " + e.what());
    }
}

void write_spectrum(const Spectrum& s, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw io_error("cannot write spectrum file: " + path.string());
    }
    char buf[80];
    for (std::size_t i = 0; i < s.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.9g %.9g\n", s.wavelengths()[i], s.fluxes()[i]);
        out << buf;
    }
    if (!out) {
        throw io_error("write failed: " + path.string());
    }
}

}  // namespace bump::spectra
