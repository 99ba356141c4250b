#pragma once

// 8-bit grayscale PNG output (zlib-compressed, filter type 0 rows). Enough
// to dump encoded spectra, filter banks and feature maps for inspection.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "bump/tensor.hpp"

namespace bump::imageio {

struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> pixels;  // row-major, expected in [0, 1]
};

// Rank-2 tensor {h, w} (or {1, h, w}) as an image; values clamped to [0, 1].
GrayImage from_tensor(const Tensor& t);

void write_png(const GrayImage& image, const std::filesystem::path& path);

}  // namespace bump::imageio
