#include "bump/fitdetect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "bump/errors.hpp"
#include "bump/rng.hpp"
#include "bump/simulate.hpp"

namespace bump::fitdetect {

namespace {

std::size_t steps_of(double lo, double hi, double step, const char* what) {
    if (!(step > 0) || !(hi >= lo))
        throw std::invalid_argument(std::string("fit grid: bad ") + what + " range");
    return static_cast<std::size_t>(std::floor((hi - lo) / step + 0.5)) + 1;
}

}  // namespace

std::size_t FitGrid::nx0() const { return steps_of(x0_min, x0_max, x0_step, "x0"); }
std::size_t FitGrid::ngamma() const {
    return steps_of(gamma_min, gamma_max, gamma_step, "gamma");
}

namespace {

struct PixelSums {
    std::vector<double> x;  // absorber-frame inverse wavelength per pixel
    std::vector<double> y;  // magnitude residual per pixel
    double sx = 0, sxx = 0, sy = 0, sxy = 0, syy = 0;
    std::size_t n = 0;
};

PixelSums gather_pixels(const Spectrum& observed, const Spectrum& composite,
                        double z_em, double z_abs) {
    if (!(z_em > 0) || !std::isfinite(z_em))
        throw std::invalid_argument("emitter redshift must be positive");
    if (z_abs < 0 || z_abs > z_em)
        throw std::invalid_argument("absorber redshift must lie in [0, z_em]");

    PixelSums p;
    const auto& lam = observed.wavelengths();
    const auto& flux = observed.fluxes();
    const double lo = composite.min_wavelength();
    const double hi = composite.max_wavelength();
    for (std::size_t i = 0; i < lam.size(); ++i) {
        if (!(flux[i] > 0)) continue;
        const double rest = lam[i] / (1.0 + z_em);
        if (rest < lo || rest > hi) continue;
        const double comp = composite.flux_at(rest);
        if (!(comp > 0)) continue;
        const double x = 1e4 * (1.0 + z_abs) / lam[i];
        const double y = -2.5 * std::log10(flux[i] / comp);
        p.x.push_back(x);
        p.y.push_back(y);
        p.sx += x;
        p.sxx += x * x;
        p.sy += y;
        p.sxy += x * y;
        p.syy += y * y;
    }
    p.n = p.x.size();
    if (p.n < 10)
        throw std::invalid_argument(
            "fit needs at least 10 valid pixels, got " + std::to_string(p.n));
    return p;
}

// Gaussian elimination with partial pivoting on an n x n system.
template <std::size_t N>
void solve_linear(double a[N][N], double b[N], double out[N]) {
    std::size_t perm[N];
    for (std::size_t i = 0; i < N; ++i) perm[i] = i;
    for (std::size_t col = 0; col < N; ++col) {
        std::size_t best = col;
        for (std::size_t r = col + 1; r < N; ++r)
            if (std::abs(a[perm[r]][col]) > std::abs(a[perm[best]][col])) best = r;
        std::swap(perm[col], perm[best]);
        const double pivot = a[perm[col]][col];
        if (!(std::abs(pivot) > 1e-300))
            throw numeric_error("singular normal equations in spectrum fit");
        for (std::size_t r = col + 1; r < N; ++r) {
            const double f = a[perm[r]][col] / pivot;
            for (std::size_t c = col; c < N; ++c) a[perm[r]][c] -= f * a[perm[col]][c];
            b[perm[r]] -= f * b[perm[col]];
        }
    }
    for (std::size_t i = N; i-- > 0;) {
        double acc = b[perm[i]];
        for (std::size_t c = i + 1; c < N; ++c) acc -= a[perm[i]][c] * out[c];
        out[i] = acc / a[perm[i]][i];
    }
}

struct PointFit {
    double c1, c2, c3, sse;
};

// Closed-form least squares for y = c1 + c2 x + c3 D(x) at one (x0, gamma);
// a negative c3 falls back to the two-parameter fit with c3 = 0.
PointFit solve_point(const PixelSums& p, double x0, double gamma) {
    double sd = 0, sxd = 0, sdd = 0, sdy = 0;
    const double x0sq = x0 * x0;
    const double gsq = gamma * gamma;
    for (std::size_t i = 0; i < p.n; ++i) {
        const double xx = p.x[i] * p.x[i];
        const double t = xx - x0sq;
        const double d = xx / (t * t + xx * gsq);
        sd += d;
        sxd += p.x[i] * d;
        sdd += d * d;
        sdy += d * p.y[i];
    }
    const double nn = static_cast<double>(p.n);

    double a[3][3] = {{nn, p.sx, sd}, {p.sx, p.sxx, sxd}, {sd, sxd, sdd}};
    double b[3] = {p.sy, p.sxy, sdy};
    double c[3];
    solve_linear<3>(a, b, c);

    PointFit fit{c[0], c[1], c[2], 0.0};
    if (fit.c3 < 0) {
        double a2[2][2] = {{nn, p.sx}, {p.sx, p.sxx}};
        double b2[2] = {p.sy, p.sxy};
        double c2[2];
        solve_linear<2>(a2, b2, c2);
        fit = {c2[0], c2[1], 0.0, 0.0};
    }
    fit.sse = p.syy - (fit.c1 * p.sy + fit.c2 * p.sxy + fit.c3 * sdy);
    if (fit.sse < 0) fit.sse = 0;
    return fit;
}

FitResult grid_search(const Spectrum& observed, const Spectrum& composite, double z_em,
                      double z_abs, const FitGrid& grid, bool parallel) {
    const PixelSums pixels = gather_pixels(observed, composite, z_em, z_abs);
    const std::size_t nx = grid.nx0();
    const std::size_t ng = grid.ngamma();
    const std::size_t total = nx * ng;
    std::vector<PointFit> fits(total);

    if (parallel) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t idx = 0; idx < static_cast<std::ptrdiff_t>(total); ++idx) {
            const auto i = static_cast<std::size_t>(idx);
            fits[i] = solve_point(pixels, grid.x0_at(i / ng), grid.gamma_at(i % ng));
        }
    } else {
        for (std::size_t i = 0; i < total; ++i)
            fits[i] = solve_point(pixels, grid.x0_at(i / ng), grid.gamma_at(i % ng));
    }

    // Serial scan in (x0, gamma) order; strict < keeps the lexicographically
    // smallest tie.
    std::size_t best = 0;
    for (std::size_t i = 1; i < total; ++i)
        if (fits[i].sse < fits[best].sse) best = i;

    FitResult result;
    result.c1 = fits[best].c1;
    result.c2 = fits[best].c2;
    result.c3 = fits[best].c3;
    result.x0 = grid.x0_at(best / ng);
    result.gamma = grid.gamma_at(best % ng);
    result.sse = fits[best].sse;
    result.n_points = pixels.n;
    result.a_bump = spectra::bump_area(result.c3, result.gamma);
    return result;
}

}  // namespace

FitResult fit_spectrum(const Spectrum& observed, const Spectrum& composite, double z_em,
                       double z_abs, const FitGrid& grid) {
    return grid_search(observed, composite, z_em, z_abs, grid, true);
}

FitResult fit_spectrum_serial(const Spectrum& observed, const Spectrum& composite,
                              double z_em, double z_abs, const FitGrid& grid) {
    return grid_search(observed, composite, z_em, z_abs, grid, false);
}

const char* to_string(RejectReason r) {
    switch (r) {
        case RejectReason::peak_position: return "peak-position";
        case RejectReason::bump_width: return "bump-width";
        case RejectReason::bump_strength: return "bump-strength";
        case RejectReason::significance: return "significance";
    }
    return "unknown";
}

bool passes(const FitResult& result, const FilterRules& rules, RejectReason* why) {
    if (!(rules.x0_hi >= rules.x0_lo) || !(rules.gamma_hi >= rules.gamma_lo))
        throw std::invalid_argument("filter rules: empty range");
    const auto fail = [&](RejectReason r) {
        if (why) *why = r;
        return false;
    };
    if (result.x0 < rules.x0_lo || result.x0 > rules.x0_hi)
        return fail(RejectReason::peak_position);
    if (result.gamma < rules.gamma_lo || result.gamma > rules.gamma_hi)
        return fail(RejectReason::bump_width);
    if (result.a_bump < rules.min_a_bump) return fail(RejectReason::bump_strength);
    if (rules.min_significance && result.significance &&
        *result.significance < *rules.min_significance)
        return fail(RejectReason::significance);
    return true;
}

Filtered filter_candidates(const std::vector<FitResult>& results,
                           const FilterRules& rules) {
    Filtered out;
    for (std::size_t i = 0; i < results.size(); ++i) {
        RejectReason why{};
        if (passes(results[i], rules, &why))
            out.accepted.push_back(i);
        else
            out.rejected.push_back({i, why});
    }
    return out;
}

double significance(const FitResult& observed_fit, const Spectrum& composite,
                    double z_em, double z_abs, double snr,
                    const std::vector<double>& observed_wavelengths,
                    std::size_t n_trials, std::uint64_t seed, const FitGrid& grid) {
    if (n_trials < 100)
        throw std::invalid_argument("significance needs at least 100 trials");
    if (!(snr > 0)) throw std::invalid_argument("snr must be positive");

    spectra::ExtinctionParams null_params;
    null_params.c1 = observed_fit.c1;
    null_params.c2 = observed_fit.c2;
    null_params.bump.c3 = 0.0;
    const Spectrum base =
        spectra::apply_extinction(composite, null_params, z_abs, z_em,
                                  observed_wavelengths);

    std::vector<std::uint8_t> below(n_trials, 0);
    std::vector<std::string> failures(n_trials);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t tt = 0; tt < static_cast<std::ptrdiff_t>(n_trials); ++tt) {
        const auto t = static_cast<std::size_t>(tt);
        try {
            const Spectrum noisy = simulate::add_noise(
                base, snr, mix_seed(seed, seed_domain::trial, t));
            const FitResult fit =
                fit_spectrum_serial(noisy, composite, z_em, z_abs, grid);
            below[t] = fit.a_bump < observed_fit.a_bump ? 1 : 0;
        } catch (const std::exception& e) {
            failures[t] = e.what();
        }
    }
    for (const auto& f : failures)
        if (!f.empty()) throw numeric_error("significance trial failed: " + f);

    std::size_t count = 0;
    for (auto b : below) count += b;
    return static_cast<double>(count) / static_cast<double>(n_trials);
}

}  // namespace bump::fitdetect
