#pragma once

// Turns observed spectra into the three network input encodings:
//   vector4761  flux vector, median-normalized, zero-padded to 4761
//   matrix69    the same vector folded row-major into 69x69
//   image256    256x256 grayscale plot of the rest-frame spectrum
// plus a simple binary batch container for encoded sample sets.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bump/simulate.hpp"
#include "bump/spectra.hpp"
#include "bump/tensor.hpp"

namespace bump::transform {

using spectra::Spectrum;

inline constexpr std::size_t kVectorLength = 4761;
inline constexpr std::size_t kMatrixSide = 69;
inline constexpr std::size_t kImageSide = 256;

enum class Encoding : std::uint8_t { vector4761 = 0, matrix69 = 1, image256 = 2 };

std::string to_string(Encoding e);
Encoding encoding_from_string(const std::string& name);

// Per-sample batch shape for an encoding: {4761}, {69,69} or {256,256}.
// Networks insert the unit channel dimension themselves.
std::vector<std::size_t> sample_shape(Encoding e);

// Flux vector: fluxes divided by their median positive value (skipped when
// no flux is positive), zero-padded to 4761 entries. Longer spectra throw
// unless strict=false, which truncates and reports it.
struct VectorResult {
    Tensor data;
    bool truncated = false;
};
VectorResult to_vector(const Spectrum& s, bool normalize = true, bool strict = true);

// Row-major fold of a 4761-vector into 69x69.
Tensor to_matrix(const Tensor& vec);

// Plot axes for the image encoding, rest-frame wavelength against flux.
struct ImageAxes {
    double lambda_min = 800.0;
    double lambda_max = 8800.0;
    double flux_min = 0.0;
    double flux_max = 50.0;
};

// 256x256 grayscale line plot: background 1 (white), curve 0 (black).
// Points outside the wavelength span are skipped; fluxes clamp to the flux
// span; consecutive in-span points are joined with Bresenham segments.
Tensor to_image(const std::vector<double>& wavelengths,
                const std::vector<double>& fluxes, const ImageAxes& axes = {});
Tensor to_image(const Spectrum& s, const ImageAxes& axes = {});

// Photometric inversion (v -> 1-v) so the curve carries the signal for
// training: background 0, curve 1.
Tensor inverted(const Tensor& image);

// Encoded sample set. Labels hold 0/1, or kNoLabel for unlabeled data.
inline constexpr std::uint8_t kNoLabel = 0xFF;

struct EncodedBatch {
    Encoding encoding = Encoding::vector4761;
    std::vector<std::size_t> shape;  // per-sample shape
    std::vector<float> data;         // samples back to back
    std::vector<std::uint8_t> labels;
    std::size_t count() const { return labels.size(); }
    std::size_t sample_size() const;
};

// Batch container: magic "BENC", u32 version, u8 encoding, u64 count,
// u32 rank, u32 dims, then per sample a u8 label and the sample as
// little-endian float32.
inline constexpr std::uint32_t kBatchFormatVersion = 1;
void write_batch(const EncodedBatch& batch, const std::filesystem::path& path);
EncodedBatch read_batch(const std::filesystem::path& path);

struct EncodeOptions {
    bool normalize = true;       // vector/matrix median normalization
    bool strict = true;          // throw on over-long spectra
    bool rest_frame = true;      // image: plot against lambda / (1 + z_em)
    bool invert = true;          // image: emit curve=1 on background=0
    ImageAxes axes;
};

// Encodes every manifest record (spectrum paths resolve against
// manifest_dir) into one batch, in manifest order.
EncodedBatch encode_manifest(const simulate::DatasetManifest& manifest,
                             const std::filesystem::path& manifest_dir, Encoding enc,
                             const EncodeOptions& options = {});

// Encodes a single spectrum to a batch-shaped tensor {1, ...}. z_em is only
// used by the image encoding.
Tensor encode_one(const Spectrum& s, Encoding enc, double z_em,
                  const EncodeOptions& options = {});

// Batch as a double tensor {N, ...sample shape} plus int labels; with
// require_labels, unlabeled entries throw.
std::pair<Tensor, std::vector<int>> to_tensor(const EncodedBatch& batch,
                                              bool require_labels = true);

}  // namespace bump::transform
