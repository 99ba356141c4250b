#pragma once

// Labeled synthetic datasets: procedural composite construction, bump
// injection, multiplicative noise, balanced generation, stratified splits.
//
// Determinism contract: manifests and spectra are pure functions of the
// config including the master seed, independent of thread count. Per-sample
// seeds are derived as mix_seed(master, seed_domain::sample, id).

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bump/spectra.hpp"

namespace bump::simulate {

using spectra::BumpProfile;
using spectra::ExtinctionParams;
using spectra::Spectrum;
using spectra::WavelengthGrid;

struct GaussianLine {
    double center_angstrom;
    double amplitude;  // relative to continuum
    double sigma_angstrom;
};

std::vector<GaussianLine> default_emission_lines();

// Procedural stand-in for a median quasar composite: power-law continuum
// normalized at 2500 A plus Gaussian emission lines.
struct CompositeSpec {
    double continuum_slope = -1.5;
    std::vector<GaussianLine> emission_lines = default_emission_lines();
    WavelengthGrid grid{700.0, 9300.0, 8601};
};

// flux(lambda) = (lambda/2500)^slope * (1 + sum_i amp_i exp(-(lambda-c_i)^2/(2 s_i^2)))
Spectrum synth_composite(const CompositeSpec& spec);

enum class Label : std::uint8_t { no_bump = 0, bump = 1 };

const char* to_string(Label l);
Label label_from_string(const std::string& s);

// Everything that determines one generated sample.
struct SampleSpec {
    Label label = Label::no_bump;
    double z_em = 0.0;
    double z_abs = 0.0;
    ExtinctionParams params;
    double snr = std::numeric_limits<double>::infinity();  // infinity = noiseless
    std::uint64_t seed = 0;
};

// Enforces: z_abs <= z_em, snr > 0, no_bump => c3 == 0, and for the bump
// class the observed bump center 1e4 (1+z_abs)/x0 inside the observed grid.
void validate(const SampleSpec& spec, const WavelengthGrid& observed);

// flux_i *= (1 + n_i / snr), n_i iid standard normal (mt19937_64 + Box-Muller,
// see rng.hpp); negative results clamped to 0. snr = infinity is the identity.
Spectrum add_noise(const Spectrum& s, double snr, std::uint64_t seed);

// Multiply flux by 10^(-0.4 c3 D(x)) at the absorber redshift; for stamping a
// bump onto user-supplied observed spectra. The bump center must be in-grid.
Spectrum inject_bump(const Spectrum& observed, double z_abs, const BumpProfile& profile);

// apply_extinction then add_noise, seeded by spec.seed.
Spectrum generate_sample(const Spectrum& composite, const SampleSpec& spec,
                         const WavelengthGrid& grid = spectra::kDefaultObservedGrid);

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

struct DatasetConfig {
    std::size_t count = 30000;
    std::filesystem::path out_dir;
    std::uint64_t master_seed = 42;
    WavelengthGrid grid = spectra::kDefaultObservedGrid;
    CompositeSpec composite;
    // When set, read the rest-frame composite from this two-column file
    // instead of synthesizing one.
    std::optional<std::filesystem::path> composite_file;
    Range z_em{1.0, 4.0};
    Range z_abs{0.75, 3.2};  // upper bound additionally capped at z_em - 0.05
    Range c1{-0.5, 0.5};
    Range c2{0.0, 1.2};
    Range snr{10.0, 50.0};
    // Profile used for the bump class; A_bump = 2.0 by default.
    BumpProfile bump{4.59, 1.0, spectra::c3_from_area(2.0, 1.0)};
};

struct ManifestRecord {
    std::uint64_t id = 0;
    std::string path;  // spectrum file, relative to the manifest directory
    SampleSpec spec;
};

struct DatasetManifest {
    std::vector<ManifestRecord> records;
    WavelengthGrid grid;
    std::string version;
};

inline constexpr const char* kGeneratorVersion = "bump2175-0.1.0";
inline constexpr std::uint32_t kManifestFormatVersion = 1;

// Generate cfg.count samples under cfg.out_dir (spectra in out_dir/spectra/),
// exactly class-balanced (|#bump - #no_bump| <= 1), records shuffled with the
// master seed, and write manifest.jsonl + manifest.header.json. Sample i draws
// z_em, z_abs, c1, c2, snr, noise-seed in that order from its own Rng, so
// generation order and parallelism cannot change the result.
DatasetManifest generate_dataset(const DatasetConfig& cfg);

// Stratified, seeded, disjoint and exhaustive split; per-class train counts
// are round(fraction * class_count). Output records keep manifest order.
std::pair<DatasetManifest, DatasetManifest> split(const DatasetManifest& manifest,
                                                  double train_fraction,
                                                  std::uint64_t seed);

// Manifest files: JSON Lines, one record per sample with keys
// {id, path, label, z_em, z_abs, x0, gamma, c3, a_bump, c1, c2, snr, seed};
// a sidecar <stem>.header.json records grid, count and version.
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& jsonl_path);
DatasetManifest read_manifest(const std::filesystem::path& jsonl_path);

// Composite used for a dataset config (procedural or user-supplied file).
Spectrum load_composite(const DatasetConfig& cfg);

}  // namespace bump::simulate
