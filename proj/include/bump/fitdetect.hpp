#pragma once

// The traditional detector: least-squares fit of a reddened composite in
// magnitude space, where y = -2.5 log10(F_obs / F_comp) is exactly linear in
// (c1, c2, c3) at fixed (x0, gamma). The outer search is an exhaustive
// (x0, gamma) grid; the inner solve a closed-form 3x3 system. Rule filtering
// and Monte-Carlo detection significance sit on top.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bump/spectra.hpp"

namespace bump::fitdetect {

using spectra::Spectrum;

struct FitResult {
    double c1 = 0;
    double c2 = 0;
    double c3 = 0;
    double x0 = 0;      // um^-1
    double gamma = 0;   // um^-1
    double sse = 0;     // sum of squared magnitude residuals
    std::size_t n_points = 0;
    double a_bump = 0;  // pi c3 / (2 gamma)
    std::optional<double> significance;
};

struct FitGrid {
    double x0_min = 4.0;
    double x0_max = 5.2;
    double x0_step = 0.02;
    double gamma_min = 0.4;
    double gamma_max = 2.0;
    double gamma_step = 0.02;

    std::size_t nx0() const;
    std::size_t ngamma() const;
    double x0_at(std::size_t i) const { return x0_min + static_cast<double>(i) * x0_step; }
    double gamma_at(std::size_t j) const {
        return gamma_min + static_cast<double>(j) * gamma_step;
    }
};

// Pixels enter the fit when the observed flux is positive and the
// de-redshifted wavelength lands on the composite with positive flux; fewer
// than 10 such pixels is an error. The grid argmin breaks SSE ties toward
// the lexicographically smallest (x0, gamma). c3 is clamped at zero by a
// two-parameter refit.
FitResult fit_spectrum(const Spectrum& observed, const Spectrum& composite,
                       double z_em, double z_abs, const FitGrid& grid = {});
// Single-threaded twin, kept as the reference for the parallel grid sweep.
FitResult fit_spectrum_serial(const Spectrum& observed, const Spectrum& composite,
                              double z_em, double z_abs, const FitGrid& grid = {});

struct FilterRules {
    double x0_lo = 4.0;
    double x0_hi = 5.2;
    double gamma_lo = 0.4;
    double gamma_hi = 2.0;
    double min_a_bump = 0.5;
    std::optional<double> min_significance = 0.95;
};

enum class RejectReason : std::uint8_t {
    peak_position,
    bump_width,
    bump_strength,
    significance,
};
const char* to_string(RejectReason r);

struct Rejection {
    std::size_t index = 0;
    RejectReason reason{};  // first rule that failed
};

struct Filtered {
    std::vector<std::size_t> accepted;
    std::vector<Rejection> rejected;
};

// Rules test in order: peak position, width, strength, significance. The
// significance rule only applies when both the rule threshold and the
// result's significance value are present.
Filtered filter_candidates(const std::vector<FitResult>& results,
                           const FilterRules& rules);
bool passes(const FitResult& result, const FilterRules& rules,
            RejectReason* why = nullptr);

// Fraction of n_trials bump-free noisy spectra (same z_em, z_abs, snr, on
// observed_wavelengths, continuum from the observed fit's c1/c2) whose
// fitted a_bump lies strictly below the observed one. Deterministic in seed;
// trial t draws from mix_seed(seed, seed_domain::trial, t).
double significance(const FitResult& observed_fit, const Spectrum& composite,
                    double z_em, double z_abs, double snr,
                    const std::vector<double>& observed_wavelengths,
                    std::size_t n_trials, std::uint64_t seed,
                    const FitGrid& grid = {});

}  // namespace bump::fitdetect
