#include "bump/inspect.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bump/rng.hpp"

namespace bump::inspect {

namespace {

// Min-max normalization into [0,1]; a flat map lands on 0.5.
void normalize_inplace(std::vector<double>& v) {
    auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
    const double lo = *lo_it, hi = *hi_it;
    if (hi > lo) {
        const double scale = 1.0 / (hi - lo);
        for (double& x : v) x = (x - lo) * scale;
    } else {
        std::fill(v.begin(), v.end(), 0.5);
    }
}

}  // namespace

Tensor tile(const std::vector<Tensor>& maps) {
    if (maps.empty()) throw std::invalid_argument("nothing to tile");
    const std::size_t h = maps[0].dim(0);
    const std::size_t w = maps[0].dim(1);
    for (const auto& m : maps)
        if (m.rank() != 2 || m.dim(0) != h || m.dim(1) != w)
            throw std::invalid_argument("tiles must share one (h,w) shape");

    const auto f = maps.size();
    const auto cols = static_cast<std::size_t>(
        std::ceil(std::sqrt(static_cast<double>(f))));
    const std::size_t rows = (f + cols - 1) / cols;
    const std::size_t out_h = rows * h + (rows - 1);
    const std::size_t out_w = cols * w + (cols - 1);

    std::vector<double> px(out_h * out_w, 1.0);
    for (std::size_t i = 0; i < f; ++i) {
        const std::size_t r0 = (i / cols) * (h + 1);
        const std::size_t c0 = (i % cols) * (w + 1);
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x)
                px[(r0 + y) * out_w + c0 + x] = maps[i].data()[y * w + x];
    }
    return Tensor({out_h, out_w}, std::move(px));
}

Tensor render_filters(const tensornet::Model& model, std::size_t layer_index) {
    if (layer_index >= model.spec.layers.size())
        throw std::invalid_argument("layer index out of range");
    const auto* conv = std::get_if<tensornet::ConvSpec>(&model.spec.layers[layer_index]);
    if (!conv) throw std::invalid_argument("filter rendering needs a conv layer");

    const Tensor& w = model.params[layer_index].w;  // {F, C, kh, kw}
    const std::size_t f = w.dim(0), c = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    std::vector<Tensor> tiles;
    tiles.reserve(f);
    for (std::size_t fi = 0; fi < f; ++fi) {
        std::vector<double> avg(kh * kw, 0.0);
        for (std::size_t ci = 0; ci < c; ++ci) {
            const double* src = w.data() + (fi * c + ci) * kh * kw;
            for (std::size_t p = 0; p < kh * kw; ++p) avg[p] += src[p];
        }
        for (double& x : avg) x /= static_cast<double>(c);
        normalize_inplace(avg);
        tiles.emplace_back(std::vector<std::size_t>{kh, kw}, std::move(avg));
    }
    return tile(tiles);
}

std::vector<Tensor> feature_maps(const tensornet::Model& model, const Tensor& input,
                                 std::size_t layer_index) {
    Tensor act = tensornet::activation_at(model, input, layer_index);
    if (act.rank() != 4)
        throw std::invalid_argument("feature maps need a spatial layer output");
    if (act.dim(0) != 1)
        throw std::invalid_argument("feature maps take a single sample");
    const std::size_t c = act.dim(1), h = act.dim(2), w = act.dim(3);
    std::vector<Tensor> maps;
    maps.reserve(c);
    for (std::size_t ci = 0; ci < c; ++ci) {
        std::vector<double> m(act.data() + ci * h * w, act.data() + (ci + 1) * h * w);
        normalize_inplace(m);
        maps.emplace_back(std::vector<std::size_t>{h, w}, std::move(m));
    }
    return maps;
}

Reconstruction reconstruct_input(const tensornet::Model& model, int target_class,
                                 std::size_t steps, double step_size,
                                 std::uint64_t seed) {
    if (!(step_size > 0)) throw std::invalid_argument("step size must be positive");
    std::vector<std::size_t> shape{1};
    shape.insert(shape.end(), model.spec.input_shape.begin(),
                 model.spec.input_shape.end());
    Tensor batch(shape);
    Rng rng(seed);
    for (double& v : batch.values()) v = rng.uniform(0.4, 0.6);

    const auto logit_of = [&](const Tensor& b) {
        const Tensor l = tensornet::logits(model, b);
        if (target_class < 0 || static_cast<std::size_t>(target_class) >= l.dim(1))
            throw std::invalid_argument("target class out of range");
        return l.data()[static_cast<std::size_t>(target_class)];
    };

    Reconstruction rec;
    rec.logit_trajectory.push_back(logit_of(batch));
    for (std::size_t s = 0; s < steps; ++s) {
        const Tensor grad =
            tensornet::logit_input_gradient(model, batch, target_class);
        double* v = batch.values().data();
        const double* g = grad.data();
        for (std::size_t i = 0; i < batch.size(); ++i)
            v[i] = std::clamp(v[i] + step_size * g[i], 0.0, 1.0);
        rec.logit_trajectory.push_back(logit_of(batch));
    }
    rec.input = batch.reshaped(model.spec.input_shape);
    return rec;
}

std::string plot_spectrum_svg(const spectra::Spectrum& s,
                              const std::vector<Overlay>& overlays) {
    std::vector<svgplot::Series> series;
    series.push_back({"spectrum", s.wavelengths(), s.fluxes()});
    for (const auto& o : overlays) series.push_back({o.name, o.wavelengths, o.fluxes});
    const auto layout = svgplot::layout_for(series);
    return svgplot::render_line_chart(series, layout, "Spectrum", "Wavelength [A]",
                                      "Flux");
}

void write_spectrum_svg(const spectra::Spectrum& s, const std::vector<Overlay>& overlays,
                        const std::filesystem::path& path) {
    std::vector<svgplot::Series> series;
    series.push_back({"spectrum", s.wavelengths(), s.fluxes()});
    for (const auto& o : overlays) series.push_back({o.name, o.wavelengths, o.fluxes});
    const auto layout = svgplot::layout_for(series);
    svgplot::write_line_chart(series, layout, "Spectrum", "Wavelength [A]", "Flux",
                              path);
}

}  // namespace bump::inspect
