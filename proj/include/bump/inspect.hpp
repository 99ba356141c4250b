#pragma once

// Model introspection: conv filter banks and feature maps as tiled
// grayscale images, gradient-ascent input reconstruction, spectrum plots.

#include <cstdint>
#include <string>
#include <vector>

#include "bump/network.hpp"
#include "bump/spectra.hpp"
#include "bump/svgplot.hpp"
#include "bump/tensor.hpp"

namespace bump::inspect {

// Tiles equal-sized {h,w} maps row-major into one image with 1-px white
// separators; missing tiles in the last row stay white.
Tensor tile(const std::vector<Tensor>& maps);

// Conv filters at layer_index, averaged over input channels, each min-max
// normalized to [0,1] (zero range maps to 0.5), tiled ceil(sqrt(F)) wide.
Tensor render_filters(const tensornet::Model& model, std::size_t layer_index);

// Per-channel min-max normalized activation maps of a spatial layer for a
// single input; count equals the channel count.
std::vector<Tensor> feature_maps(const tensornet::Model& model, const Tensor& input,
                                 std::size_t layer_index);

struct Reconstruction {
    Tensor input;                          // final image, input-shaped
    std::vector<double> logit_trajectory;  // initial value plus one per step
};

// Gradient ascent on the pre-softmax logit of target_class from seeded
// uniform noise in [0.4, 0.6], clamped to [0,1] after every step.
Reconstruction reconstruct_input(const tensornet::Model& model, int target_class,
                                 std::size_t steps, double step_size,
                                 std::uint64_t seed);

struct Overlay {
    std::string name;
    std::vector<double> wavelengths;
    std::vector<double> fluxes;
};

// Spectrum line plot with optional overlay curves as extra polylines.
std::string plot_spectrum_svg(const spectra::Spectrum& s,
                              const std::vector<Overlay>& overlays = {});
void write_spectrum_svg(const spectra::Spectrum& s, const std::vector<Overlay>& overlays,
                        const std::filesystem::path& path);

}  // namespace bump::inspect
