#include "bump/imageio.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "bump/errors.hpp"

namespace bump::imageio {

GrayImage from_tensor(const Tensor& t) {
    std::size_t h = 0, w = 0;
    if (t.rank() == 2) {
        h = t.dim(0);
        w = t.dim(1);
    } else if (t.rank() == 3 && t.dim(0) == 1) {
        h = t.dim(1);
        w = t.dim(2);
    } else {
        throw std::invalid_argument("image tensor must be (h,w) or (1,h,w)");
    }
    GrayImage img;
    img.width = w;
    img.height = h;
    img.pixels.assign(t.data(), t.data() + t.size());
    return img;
}

namespace {

void append_u32_be(std::string& buf, std::uint32_t v) {
    buf.push_back(static_cast<char>((v >> 24) & 0xFF));
    buf.push_back(static_cast<char>((v >> 16) & 0xFF));
    buf.push_back(static_cast<char>((v >> 8) & 0xFF));
    buf.push_back(static_cast<char>(v & 0xFF));
}

void append_chunk(std::string& buf, const char type[4], const std::string& payload) {
    append_u32_be(buf, static_cast<std::uint32_t>(payload.size()));
    const std::size_t crc_start = buf.size();
    buf.append(type, 4);
    buf += payload;
    const auto crc = static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(buf.data() + crc_start),
                static_cast<uInt>(buf.size() - crc_start)));
    append_u32_be(buf, crc);
}

}  // namespace

void write_png(const GrayImage& image, const std::filesystem::path& path) {
    if (image.width == 0 || image.height == 0 ||
        image.pixels.size() != image.width * image.height)
        throw std::invalid_argument("image dimensions do not match its pixel count");

    // Raw scanlines, one leading filter byte (0 = none) per row.
    std::string raw;
    raw.reserve(image.height * (image.width + 1));
    std::size_t at = 0;
    for (std::size_t y = 0; y < image.height; ++y) {
        raw.push_back('\0');
        for (std::size_t x = 0; x < image.width; ++x, ++at) {
            const double v = std::clamp(image.pixels[at], 0.0, 1.0);
            raw.push_back(static_cast<char>(std::lround(v * 255.0)));
        }
    }

    uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
    std::string zdata(zlen, '\0');
    const int rc = compress2(reinterpret_cast<Bytef*>(zdata.data()), &zlen,
                             reinterpret_cast<const Bytef*>(raw.data()),
                             static_cast<uLong>(raw.size()), 9);
    if (rc != Z_OK) throw io_error("png compression failed");
    zdata.resize(zlen);

    std::string ihdr;
    append_u32_be(ihdr, static_cast<std::uint32_t>(image.width));
    append_u32_be(ihdr, static_cast<std::uint32_t>(image.height));
    ihdr.push_back(8);     // bit depth
    ihdr.push_back(0);     // color type: grayscale
    ihdr.push_back(0);     // compression
    ihdr.push_back(0);     // filter method
    ihdr.push_back(0);     // no interlace

    std::string buf("\x89PNG\r\n\x1a\n", 8);
    append_chunk(buf, "IHDR", ihdr);
    append_chunk(buf, "IDAT", zdata);
    append_chunk(buf, "IEND", {});

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open " + path.string() + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw io_error("short write to " + path.string());
}

}  // namespace bump::imageio
