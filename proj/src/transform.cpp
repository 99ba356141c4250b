#include "bump/transform.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "bump/errors.hpp"

namespace bump::transform {

static_assert(std::endian::native == std::endian::little,
              "batch container assumes a little-endian host");

std::string to_string(Encoding e) {
    switch (e) {
        case Encoding::vector4761: return "vector4761";
        case Encoding::matrix69: return "matrix69";
        case Encoding::image256: return "image256";
    }
    throw std::invalid_argument("bad encoding value");
}

Encoding encoding_from_string(const std::string& name) {
    if (name == "vector4761" || name == "vector") return Encoding::vector4761;
    if (name == "matrix69" || name == "matrix") return Encoding::matrix69;
    if (name == "image256" || name == "image") return Encoding::image256;
    throw std::invalid_argument("unknown encoding: " + name);
}

std::vector<std::size_t> sample_shape(Encoding e) {
    switch (e) {
        case Encoding::vector4761: return {kVectorLength};
        case Encoding::matrix69: return {kMatrixSide, kMatrixSide};
        case Encoding::image256: return {kImageSide, kImageSide};
    }
    throw std::invalid_argument("bad encoding value");
}

VectorResult to_vector(const Spectrum& s, bool normalize, bool strict) {
    const auto& flux = s.fluxes();
    std::size_t n = flux.size();
    VectorResult result;
    if (n > kVectorLength) {
        if (strict)
            throw std::invalid_argument("spectrum has " + std::to_string(n) +
                                        " pixels, more than the vector length " +
                                        std::to_string(kVectorLength));
        n = kVectorLength;
        result.truncated = true;
    }

    std::vector<double> v(kVectorLength, 0.0);
    std::copy(flux.begin(), flux.begin() + static_cast<std::ptrdiff_t>(n), v.begin());

    if (normalize) {
        std::vector<double> positive;
        positive.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            if (v[i] > 0) positive.push_back(v[i]);
        if (!positive.empty()) {
            std::sort(positive.begin(), positive.end());
            const std::size_t m = positive.size();
            const double median = (m % 2 == 1)
                                      ? positive[m / 2]
                                      : 0.5 * (positive[m / 2 - 1] + positive[m / 2]);
            for (double& x : v) x /= median;
        }
    }
    result.data = Tensor({kVectorLength}, std::move(v));
    return result;
}

Tensor to_matrix(const Tensor& vec) {
    if (vec.rank() != 1 || vec.dim(0) != kVectorLength)
        throw std::invalid_argument("matrix fold needs a vector of length " +
                                    std::to_string(kVectorLength));
    return vec.reshaped({kMatrixSide, kMatrixSide});
}

namespace {

// Nearest pixel under the plot's affine map, or -1 off the wavelength span.
int column_of(double lambda, const ImageAxes& a) {
    if (lambda < a.lambda_min || lambda > a.lambda_max) return -1;
    const double t = (lambda - a.lambda_min) / (a.lambda_max - a.lambda_min);
    const int col = static_cast<int>(
        std::floor(t * static_cast<double>(kImageSide - 1) + 0.5));
    return std::clamp(col, 0, static_cast<int>(kImageSide) - 1);
}

int row_of(double flux, const ImageAxes& a) {
    const double f = std::clamp(flux, a.flux_min, a.flux_max);
    const double t = (a.flux_max - f) / (a.flux_max - a.flux_min);
    const int row = static_cast<int>(
        std::floor(t * static_cast<double>(kImageSide - 1) + 0.5));
    return std::clamp(row, 0, static_cast<int>(kImageSide) - 1);
}

void put(std::vector<double>& px, int row, int col) {
    px[static_cast<std::size_t>(row) * kImageSide + static_cast<std::size_t>(col)] = 0.0;
}

// All-octant integer Bresenham, endpoints included.
void draw_segment(std::vector<double>& px, int r0, int c0, int r1, int c1) {
    const int dc = std::abs(c1 - c0);
    const int dr = -std::abs(r1 - r0);
    const int sc = c0 < c1 ? 1 : -1;
    const int sr = r0 < r1 ? 1 : -1;
    int err = dc + dr;
    int r = r0, c = c0;
    while (true) {
        put(px, r, c);
        if (r == r1 && c == c1) break;
        const int e2 = 2 * err;
        if (e2 >= dr) {
            err += dr;
            c += sc;
        }
        if (e2 <= dc) {
            err += dc;
            r += sr;
        }
    }
}

}  // namespace

Tensor to_image(const std::vector<double>& wavelengths,
                const std::vector<double>& fluxes, const ImageAxes& axes) {
    if (wavelengths.size() != fluxes.size())
        throw std::invalid_argument("wavelength and flux arrays differ in length");
    if (!(axes.lambda_max > axes.lambda_min) || !(axes.flux_max > axes.flux_min))
        throw std::invalid_argument("image axes must span a positive range");

    std::vector<double> px(kImageSide * kImageSide, 1.0);
    bool have_prev = false;
    int pr = 0, pc = 0;
    for (std::size_t i = 0; i < wavelengths.size(); ++i) {
        const int col = column_of(wavelengths[i], axes);
        if (col < 0) {
            have_prev = false;
            continue;
        }
        const int row = row_of(fluxes[i], axes);
        if (have_prev)
            draw_segment(px, pr, pc, row, col);
        else
            put(px, row, col);
        have_prev = true;
        pr = row;
        pc = col;
    }
    return Tensor({kImageSide, kImageSide}, std::move(px));
}

Tensor to_image(const Spectrum& s, const ImageAxes& axes) {
    return to_image(s.wavelengths(), s.fluxes(), axes);
}

Tensor inverted(const Tensor& image) {
    Tensor out(image.shape());
    const double* src = image.data();
    double* dst = out.values().data();
    for (std::size_t i = 0; i < image.size(); ++i) dst[i] = 1.0 - src[i];
    return out;
}

std::size_t EncodedBatch::sample_size() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<std::size_t>());
}

void write_batch(const EncodedBatch& batch, const std::filesystem::path& path) {
    if (batch.shape.empty()) throw std::invalid_argument("batch has no sample shape");
    if (batch.data.size() != batch.count() * batch.sample_size())
        throw std::invalid_argument("batch data does not match count * sample size");

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open " + path.string() + " for writing");

    const auto put_bytes = [&](const void* p, std::size_t n) {
        out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    };
    out.write("BENC", 4);
    const std::uint32_t version = kBatchFormatVersion;
    put_bytes(&version, 4);
    const auto enc = static_cast<std::uint8_t>(batch.encoding);
    put_bytes(&enc, 1);
    const auto count = static_cast<std::uint64_t>(batch.count());
    put_bytes(&count, 8);
    const auto rank = static_cast<std::uint32_t>(batch.shape.size());
    put_bytes(&rank, 4);
    for (std::size_t d : batch.shape) {
        const auto dim = static_cast<std::uint32_t>(d);
        put_bytes(&dim, 4);
    }
    const std::size_t sample = batch.sample_size();
    for (std::size_t i = 0; i < batch.count(); ++i) {
        put_bytes(&batch.labels[i], 1);
        put_bytes(batch.data.data() + i * sample, sample * sizeof(float));
    }
    if (!out) throw io_error("short write to " + path.string());
}

EncodedBatch read_batch(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open batch file " + path.string());
    std::string buf((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());

    std::size_t at = 0;
    const auto need = [&](std::size_t n) {
        if (at + n > buf.size())
            throw io_error("batch file " + path.string() + " is truncated");
    };
    need(4);
    if (buf.compare(0, 4, "BENC") != 0)
        throw io_error("batch file " + path.string() + " has a bad magic number");
    at = 4;

    const auto get = [&](void* p, std::size_t n) {
        need(n);
        std::memcpy(p, buf.data() + at, n);
        at += n;
    };
    std::uint32_t version = 0;
    get(&version, 4);
    if (version != kBatchFormatVersion)
        throw io_error("batch file " + path.string() + " has unsupported version " +
                       std::to_string(version));

    EncodedBatch batch;
    std::uint8_t enc = 0;
    get(&enc, 1);
    if (enc > 2) throw io_error("batch file " + path.string() + " has a bad encoding");
    batch.encoding = static_cast<Encoding>(enc);

    std::uint64_t count = 0;
    get(&count, 8);
    std::uint32_t rank = 0;
    get(&rank, 4);
    if (rank == 0 || rank > 8)
        throw io_error("batch file " + path.string() + " has a bad sample rank");
    for (std::uint32_t i = 0; i < rank; ++i) {
        std::uint32_t dim = 0;
        get(&dim, 4);
        if (dim == 0) throw io_error("batch file " + path.string() + " has a zero dim");
        batch.shape.push_back(dim);
    }

    const std::size_t sample = batch.sample_size();
    const std::size_t expect = at + count * (1 + sample * sizeof(float));
    if (expect != buf.size())
        throw io_error("batch file " + path.string() + " has a bad payload size");

    batch.labels.resize(count);
    batch.data.resize(count * sample);
    for (std::uint64_t i = 0; i < count; ++i) {
        get(&batch.labels[i], 1);
        get(batch.data.data() + i * sample, sample * sizeof(float));
    }
    return batch;
}

Tensor encode_one(const Spectrum& s, Encoding enc, double z_em,
                  const EncodeOptions& options) {
    switch (enc) {
        case Encoding::vector4761: {
            auto v = to_vector(s, options.normalize, options.strict);
            return v.data.reshaped({1, kVectorLength});
        }
        case Encoding::matrix69: {
            auto v = to_vector(s, options.normalize, options.strict);
            return to_matrix(v.data).reshaped({1, kMatrixSide, kMatrixSide});
        }
        case Encoding::image256: {
            std::vector<double> lam = s.wavelengths();
            if (options.rest_frame) {
                if (!(z_em > -1))
                    throw std::invalid_argument("emitter redshift must exceed -1");
                for (double& l : lam) l /= (1.0 + z_em);
            }
            Tensor img = to_image(lam, s.fluxes(), options.axes);
            if (options.invert) img = inverted(img);
            return img.reshaped({1, kImageSide, kImageSide});
        }
    }
    throw std::invalid_argument("bad encoding value");
}

EncodedBatch encode_manifest(const simulate::DatasetManifest& manifest,
                             const std::filesystem::path& manifest_dir, Encoding enc,
                             const EncodeOptions& options) {
    EncodedBatch batch;
    batch.encoding = enc;
    batch.shape = sample_shape(enc);
    const std::size_t n = manifest.records.size();
    const std::size_t sample = batch.sample_size();
    batch.labels.assign(n, kNoLabel);
    batch.data.assign(n * sample, 0.0f);

    std::vector<std::string> failures(n);
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const auto& rec = manifest.records[i];
        try {
            const Spectrum s = spectra::read_spectrum(manifest_dir / rec.path);
            const Tensor t = encode_one(s, enc, rec.spec.z_em, options);
            if (t.size() != sample)
                throw std::invalid_argument("encoded sample has the wrong size");
            float* dst = batch.data.data() + i * sample;
            const double* src = t.data();
            for (std::size_t p = 0; p < sample; ++p)
                dst[p] = static_cast<float>(src[p]);
            batch.labels[i] = static_cast<std::uint8_t>(rec.spec.label);
        } catch (const std::exception& e) {
            failures[i] = e.what();
        }
    }
    for (const auto& f : failures)
        if (!f.empty()) throw io_error("encoding failed: " + f);
    return batch;
}

std::pair<Tensor, std::vector<int>> to_tensor(const EncodedBatch& batch,
                                              bool require_labels) {
    const std::size_t n = batch.count();
    if (n == 0) throw std::invalid_argument("batch is empty");
    std::vector<std::size_t> shape{n};
    shape.insert(shape.end(), batch.shape.begin(), batch.shape.end());
    Tensor t(shape);
    for (std::size_t i = 0; i < batch.data.size(); ++i)
        t.values()[i] = static_cast<double>(batch.data[i]);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (batch.labels[i] == kNoLabel) {
            if (require_labels)
                throw std::invalid_argument("batch sample " + std::to_string(i) +
                                            " has no label");
            labels[i] = -1;
        } else {
            labels[i] = batch.labels[i];
        }
    }
    return {std::move(t), std::move(labels)};
}

}  // namespace bump::transform
