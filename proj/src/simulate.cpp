#include "bump/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "bump/errors.hpp"
#include "bump/rng.hpp"

namespace bump::simulate {

using ordered_json = nlohmann::ordered_json;

std::vector<GaussianLine> default_emission_lines() {
    // Lya, CIV, CIII], MgII, Hbeta, Halpha
    return {
        {1216.0, 2.5, 15.0}, {1549.0, 1.2, 12.0}, {1909.0, 0.8, 12.0},
        {2798.0, 0.6, 15.0}, {4861.0, 0.8, 15.0}, {6563.0, 1.5, 20.0},
    };
}

static void validate(const CompositeSpec& spec) {
    if (spec.grid.count < 2 || !(spec.grid.min_angstrom < spec.grid.max_angstrom)) {
        throw std::invalid_argument("CompositeSpec: bad grid");
    }
    if (!std::isfinite(spec.continuum_slope)) {
        throw std::invalid_argument("CompositeSpec: slope must be finite");
    }
    for (const auto& l : spec.emission_lines) {
        if (!(l.amplitude >= 0.0) || !(l.sigma_angstrom > 0.0)) {
            throw std::invalid_argument("CompositeSpec: amplitudes >= 0, sigmas > 0");
        }
    }
}

Spectrum synth_composite(const CompositeSpec& spec) {
    validate(spec);
    auto w = spec.grid.wavelengths();
    std::vector<double> f(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        double lines = 1.0;
        for (const auto& l : spec.emission_lines) {
            const double d = w[i] - l.center_angstrom;
            lines += l.amplitude * std::exp(-d * d / (2.0 * l.sigma_angstrom * l.sigma_angstrom));
        }
        f[i] = std::pow(w[i] / 2500.0, spec.continuum_slope) * lines;
    }
    return Spectrum(std::move(w), std::move(f));
}

const char* to_string(Label l) { return l == Label::bump ? "bump" : "no_bump"; }

Label label_from_string(const std::string& s) {
    if (s == "bump") return Label::bump;
    if (s == "no_bump") return Label::no_bump;
    throw std::invalid_argument("unknown label: " + s);
}

void validate(const SampleSpec& spec, const WavelengthGrid& observed) {
    spectra::validate(spec.params);
    if (!(spec.z_abs >= 0.0) || !(spec.z_abs <= spec.z_em)) {
        throw std::invalid_argument("SampleSpec: need 0 <= z_abs <= z_em");
    }
    if (!(spec.snr > 0.0)) {
        throw std::invalid_argument("SampleSpec: snr must be > 0");
    }
    if (spec.label == Label::no_bump && spec.params.bump.c3 != 0.0) {
        throw std::invalid_argument("SampleSpec: no_bump samples must have c3 == 0");
    }
    if (spec.label == Label::bump) {
        const double center = 1e4 * (1.0 + spec.z_abs) / spec.params.bump.x0;
        if (center < observed.min_angstrom || center > observed.max_angstrom) {
            throw std::invalid_argument("SampleSpec: observed bump center outside grid");
        }
    }
}

Spectrum add_noise(const Spectrum& s, double snr, std::uint64_t seed) {
    if (!(snr > 0.0)) {
        throw std::invalid_argument("add_noise: snr must be > 0");
    }
    if (std::isinf(snr)) {
        return s;
    }
    Rng rng(seed);
    std::vector<double> f(s.fluxes());
    for (double& v : f) {
        v *= 1.0 + rng.normal() / snr;
        if (v < 0.0) v = 0.0;
    }
    return Spectrum(s.wavelengths(), std::move(f));
}

Spectrum inject_bump(const Spectrum& observed, double z_abs, const BumpProfile& profile) {
    spectra::validate(profile);
    if (!(z_abs >= 0.0)) {
        throw std::invalid_argument("inject_bump: z_abs must be >= 0");
    }
    const double center = 1e4 * (1.0 + z_abs) / profile.x0;
    if (center < observed.min_wavelength() || center > observed.max_wavelength()) {
        throw std::invalid_argument("inject_bump: bump center outside spectrum grid");
    }
    std::vector<double> f(observed.fluxes());
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double x = 1e4 * (1.0 + z_abs) / observed.wavelengths()[i];
        const double a = profile.c3 * spectra::drude(x, profile.x0, profile.gamma);
        f[i] *= std::pow(10.0, -0.4 * a);
    }
    return Spectrum(observed.wavelengths(), std::move(f));
}

Spectrum generate_sample(const Spectrum& composite, const SampleSpec& spec,
                         const WavelengthGrid& grid) {
    validate(spec, grid);
    Spectrum observed =
        spectra::apply_extinction(composite, spec.params, spec.z_abs, spec.z_em, grid);
    return add_noise(observed, spec.snr, spec.seed);
}

Spectrum load_composite(const DatasetConfig& cfg) {
    if (cfg.composite_file) {
        return spectra::read_spectrum(*cfg.composite_file);
    }
    return synth_composite(cfg.composite);
}

static SampleSpec draw_sample_spec(const DatasetConfig& cfg, std::uint64_t id) {
    Rng rng(mix_seed(cfg.master_seed, seed_domain::sample, id));
    SampleSpec s;
    s.label = (id % 2 == 0) ? Label::bump : Label::no_bump;
    s.z_em = rng.uniform(cfg.z_em.lo, cfg.z_em.hi);
    const double z_abs_hi = std::min(cfg.z_abs.hi, s.z_em - 0.05);
    s.z_abs = rng.uniform(cfg.z_abs.lo, z_abs_hi);
    s.params.c1 = rng.uniform(cfg.c1.lo, cfg.c1.hi);
    s.params.c2 = rng.uniform(cfg.c2.lo, cfg.c2.hi);
    s.snr = rng.uniform(cfg.snr.lo, cfg.snr.hi);
    s.seed = rng.raw();
    s.params.bump = cfg.bump;
    if (s.label == Label::no_bump) {
        s.params.bump.c3 = 0.0;
    }
    return s;
}

DatasetManifest generate_dataset(const DatasetConfig& cfg) {
    if (cfg.count < 2) {
        throw config_error("generate_dataset: count must be >= 2");
    }
    if (!(cfg.z_abs.lo <= std::min(cfg.z_abs.hi, cfg.z_em.lo - 0.05))) {
        throw config_error("generate_dataset: empty z_abs interval for some z_em");
    }
    spectra::validate(cfg.bump);

    const Spectrum composite = load_composite(cfg);

    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir / "spectra", ec);
    if (ec) {
        throw io_error("cannot create output directory: " + (cfg.out_dir / "spectra").string());
    }

    DatasetManifest manifest;
    manifest.grid = cfg.grid;
    manifest.version = kGeneratorVersion;
    manifest.records.resize(cfg.count);

    std::vector<std::string> errors(cfg.count);
#pragma omp parallel for schedule(dynamic, 16)
    for (long long i = 0; i < static_cast<long long>(cfg.count); ++i) {
        const auto id = static_cast<std::uint64_t>(i);
        try {
            ManifestRecord rec;
            rec.id = id;
            rec.spec = draw_sample_spec(cfg, id);
            char name[64];
            std::snprintf(name, sizeof(name), "spectra/sample_%06llu.txt",
                          static_cast<unsigned long long>(id));
            rec.path = name;
            Spectrum sample = generate_sample(composite, rec.spec, cfg.grid);
            spectra::write_spectrum(sample, cfg.out_dir / rec.path);
            manifest.records[static_cast<std::size_t>(i)] = std::move(rec);
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(i)] = e.what();
        }
    }
    for (const auto& e : errors) {
        if (!e.empty()) throw io_error("sample generation failed: " + e);
    }

    Rng shuffle_rng(mix_seed(cfg.master_seed, seed_domain::shuffle, 0));
    shuffle_rng.shuffle(manifest.records);

    write_manifest(manifest, cfg.out_dir / "manifest.jsonl");
    return manifest;
}

std::pair<DatasetManifest, DatasetManifest> split(const DatasetManifest& manifest,
                                                  double train_fraction,
                                                  std::uint64_t seed) {
    if (!(train_fraction > 0.0) || !(train_fraction < 1.0)) {
        throw std::invalid_argument("split: train_fraction must be in (0, 1)");
    }
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        by_class[static_cast<int>(manifest.records[i].spec.label)].push_back(i);
    }
    std::vector<bool> in_train(manifest.records.size(), false);
    for (int c = 0; c < 2; ++c) {
        auto& idx = by_class[c];
        Rng rng(mix_seed(seed, seed_domain::split, static_cast<std::uint64_t>(c)));
        rng.shuffle(idx);
        const auto n_train = static_cast<std::size_t>(
            std::llround(train_fraction * static_cast<double>(idx.size())));
        if (n_train == 0 || n_train == idx.size()) {
            throw std::invalid_argument("split: degenerate class split");
        }
        for (std::size_t k = 0; k < n_train; ++k) in_train[idx[k]] = true;
    }
    DatasetManifest train, test;
    train.grid = test.grid = manifest.grid;
    train.version = test.version = manifest.version;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        (in_train[i] ? train : test).records.push_back(manifest.records[i]);
    }
    return {std::move(train), std::move(test)};
}

static ordered_json record_to_json(const ManifestRecord& r) {
    ordered_json j;
    j["id"] = r.id;
    j["path"] = r.path;
    j["label"] = to_string(r.spec.label);
    j["z_em"] = r.spec.z_em;
    j["z_abs"] = r.spec.z_abs;
    j["x0"] = r.spec.params.bump.x0;
    j["gamma"] = r.spec.params.bump.gamma;
    j["c3"] = r.spec.params.bump.c3;
    j["a_bump"] = spectra::bump_area(r.spec.params.bump.c3, r.spec.params.bump.gamma);
    j["c1"] = r.spec.params.c1;
    j["c2"] = r.spec.params.c2;
    j["snr"] = r.spec.snr;
    j["seed"] = r.spec.seed;
    return j;
}

static std::filesystem::path header_path_for(const std::filesystem::path& jsonl_path) {
    std::filesystem::path p = jsonl_path;
    p.replace_extension(".header.json");
    return p;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& jsonl_path) {
    std::ofstream out(jsonl_path);
    if (!out) {
        throw io_error("cannot write manifest: " + jsonl_path.string());
    }
    for (const auto& r : manifest.records) {
        out << record_to_json(r).dump() << "\n";
    }
    if (!out) {
        throw io_error("manifest write failed: " + jsonl_path.string());
    }

    ordered_json header;
    header["format"] = "bump-manifest";
    header["version"] = kManifestFormatVersion;
    header["generator"] = manifest.version;
    header["grid"] = {{"min_angstrom", manifest.grid.min_angstrom},
                      {"max_angstrom", manifest.grid.max_angstrom},
                      {"count", manifest.grid.count}};
    header["records"] = manifest.records.size();
    std::ofstream hout(header_path_for(jsonl_path));
    if (!hout) {
        throw io_error("cannot write manifest header: " + header_path_for(jsonl_path).string());
    }
    hout << header.dump(2) << "\n";
}

DatasetManifest read_manifest(const std::filesystem::path& jsonl_path) {
    std::ifstream in(jsonl_path);
    if (!in) {
        throw io_error("cannot open manifest: " + jsonl_path.string());
    }
    DatasetManifest m;
    m.version = kGeneratorVersion;

    std::ifstream hin(header_path_for(jsonl_path));
    if (hin) {
        try {
            const auto header = ordered_json::parse(hin);
            m.version = header.value("generator", kGeneratorVersion);
            if (header.contains("grid")) {
                m.grid.min_angstrom = header["grid"].value("min_angstrom", m.grid.min_angstrom);
                m.grid.max_angstrom = header["grid"].value("max_angstrom", m.grid.max_angstrom);
                m.grid.count = header["grid"].value("count", m.grid.count);
            }
        } catch (const ordered_json::exception& e) {
            throw io_error("bad manifest header: " + std::string(e.what()));
        }
    }

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
            ManifestRecord r;
            r.id = j.at("id").get<std::uint64_t>();
            r.path = j.at("path").get<std::string>();
            r.spec.label = label_from_string(j.at("label").get<std::string>());
            r.spec.z_em = j.at("z_em").get<double>();
            r.spec.z_abs = j.at("z_abs").get<double>();
            r.spec.params.bump.x0 = j.at("x0").get<double>();
            r.spec.params.bump.gamma = j.at("gamma").get<double>();
            r.spec.params.bump.c3 = j.at("c3").get<double>();
            r.spec.params.c1 = j.at("c1").get<double>();
            r.spec.params.c2 = j.at("c2").get<double>();
            r.spec.snr = j.at("snr").get<double>();
            r.spec.seed = j.at("seed").get<std::uint64_t>();
            m.records.push_back(std::move(r));
        } catch (const ordered_json::exception& e) {
            throw io_error(jsonl_path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return m;
}

}  // namespace bump::simulate
