#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "doctest.h"

#include "bump/errors.hpp"
#include "bump/rng.hpp"
#include "bump/simulate.hpp"
#include "bump/transform.hpp"

using namespace bump;
using namespace bump::transform;
namespace fs = std::filesystem;

namespace {

Spectrum ramp_spectrum(std::size_t n, double f0 = 1.0, double slope = 0.0) {
    std::vector<double> wl(n), fl(n);
    for (std::size_t i = 0; i < n; ++i) {
        wl[i] = 3800.0 + static_cast<double>(i);
        fl[i] = f0 + slope * static_cast<double>(i);
    }
    return Spectrum(wl, fl);
}

std::set<int> marked_rows(const Tensor& img, int col) {
    std::set<int> rows;
    for (std::size_t r = 0; r < kImageSide; ++r)
        if (img.values()[r * kImageSide + static_cast<std::size_t>(col)] == 0.0)
            rows.insert(static_cast<int>(r));
    return rows;
}

}  // namespace

TEST_CASE("encoding names round trip and short names are accepted") {
    CHECK(to_string(Encoding::vector4761) == "vector4761");
    CHECK(to_string(Encoding::matrix69) == "matrix69");
    CHECK(to_string(Encoding::image256) == "image256");
    CHECK(encoding_from_string("vector") == Encoding::vector4761);
    CHECK(encoding_from_string("matrix69") == Encoding::matrix69);
    CHECK(encoding_from_string("image") == Encoding::image256);
    CHECK_THROWS_AS(encoding_from_string("tensor"), std::invalid_argument);

    CHECK(sample_shape(Encoding::vector4761) == std::vector<std::size_t>{4761});
    CHECK(sample_shape(Encoding::matrix69) == (std::vector<std::size_t>{69, 69}));
    CHECK(sample_shape(Encoding::image256) == (std::vector<std::size_t>{256, 256}));
}

TEST_CASE("vector encoding pads the tail with zeros") {
    const auto r = to_vector(ramp_spectrum(4600, 2.0));
    REQUIRE(r.data.size() == kVectorLength);
    CHECK(!r.truncated);
    for (std::size_t i = 0; i < 4600; ++i) CHECK(r.data.values()[i] == 1.0);
    for (std::size_t i = 4600; i < kVectorLength; ++i)
        CHECK(r.data.values()[i] == 0.0);
}

TEST_CASE("vector normalization divides by the median positive flux") {
    std::vector<double> wl{1.0, 2.0, 3.0, 4.0}, fl{1.0, 2.0, 3.0, 4.0};
    const auto r = to_vector(Spectrum(wl, fl));
    // median of {1,2,3,4} = 2.5
    CHECK(r.data.values()[0] == doctest::Approx(0.4));
    CHECK(r.data.values()[3] == doctest::Approx(1.6));

    // zeros are excluded from the median: median of positives {1,3} = 2
    const auto r2 = to_vector(Spectrum({1.0, 2.0, 3.0}, {1.0, 0.0, 3.0}));
    CHECK(r2.data.values()[0] == doctest::Approx(0.5));
    CHECK(r2.data.values()[2] == doctest::Approx(1.5));

    // nothing positive: left untouched
    const auto r3 = to_vector(Spectrum({1.0, 2.0}, {0.0, 0.0}));
    CHECK(r3.data.values()[0] == 0.0);

    const auto raw = to_vector(ramp_spectrum(100, 5.0), false);
    CHECK(raw.data.values()[0] == 5.0);
}

TEST_CASE("over-long spectra throw in strict mode and truncate otherwise") {
    const auto big = ramp_spectrum(kVectorLength + 10, 1.0, 0.001);
    CHECK_THROWS_AS(to_vector(big), std::invalid_argument);
    const auto r = to_vector(big, true, false);
    CHECK(r.truncated);
    CHECK(r.data.size() == kVectorLength);
}

TEST_CASE("matrix fold is row-major") {
    Tensor vec({kVectorLength});
    for (std::size_t i = 0; i < kVectorLength; ++i)
        vec.values()[i] = static_cast<double>(i);
    const auto m = to_matrix(vec);
    REQUIRE(m.rank() == 2);
    REQUIRE(m.dim(0) == kMatrixSide);
    CHECK(m.values()[0] == 0.0);
    CHECK(m.values()[1 * kMatrixSide + 0] == 69.0);
    CHECK(m.values()[68 * kMatrixSide + 68] == 4760.0);
    CHECK(m.values()[12 * kMatrixSide + 34] == 12.0 * 69.0 + 34.0);

    CHECK_THROWS_AS(to_matrix(Tensor({100})), std::invalid_argument);
}

TEST_CASE("image places the axis midpoint pixel at (128,128)") {
    // lambda 4800 is halfway through [800,8800]; flux 25 halfway through [0,50]
    const auto img = to_image(std::vector<double>{4800.0}, std::vector<double>{25.0});
    REQUIRE(img.rank() == 2);
    CHECK(img.values()[128 * kImageSide + 128] == 0.0);
    std::size_t black = 0;
    for (double v : img.values())
        if (v == 0.0) ++black;
    CHECK(black == 1);
}

TEST_CASE("fluxes clamp to the plot range and high flux maps to row 0") {
    const auto img = to_image(std::vector<double>{800.0, 8800.0},
                              std::vector<double>{1000.0, -5.0});
    CHECK(img.values()[0 * kImageSide + 0] == 0.0);      // clamped top-left
    CHECK(img.values()[255 * kImageSide + 255] == 0.0);  // clamped bottom-right
}

TEST_CASE("points outside the wavelength span leave the canvas blank") {
    const auto img = to_image(std::vector<double>{100.0, 9000.0},
                              std::vector<double>{1.0, 1.0});
    // 9000 > 8800 and 100 < 800: nothing in span, but out-of-span points
    // should also not join into segments
    std::size_t black = 0;
    for (double v : img.values())
        if (v == 0.0) ++black;
    CHECK(black == 0);
}

TEST_CASE("out-of-span points break the polyline") {
    const auto img = to_image(std::vector<double>{2000.0, 9000.0, 7000.0},
                              std::vector<double>{25.0, 25.0, 25.0});
    // columns strictly between col(2000) and col(7000) must stay empty
    const int c0 = 38;   // round(255*1200/8000)
    const int c1 = 198;  // round(255*6200/8000)
    CHECK(!marked_rows(img, c0).empty());
    CHECK(!marked_rows(img, c1).empty());
    for (int c = c0 + 1; c < c1; ++c) CHECK(marked_rows(img, c).empty());
}

TEST_CASE("connected segments cover every intermediate column") {
    std::vector<double> wl, fl;
    for (int i = 0; i <= 100; ++i) {
        wl.push_back(1000.0 + 70.0 * i);
        fl.push_back(10.0 + 30.0 * std::sin(i * 0.3));
    }
    const auto img = to_image(wl, fl);
    const int first = 6;   // column of 1000.0
    const int last = 230;  // column of 8000.0
    for (int c = first; c <= last; ++c) CHECK(!marked_rows(img, c).empty());
}

TEST_CASE("a straight segment tracks the linear interpolant within a pixel") {
    // flux ramps linearly over one wide segment
    const auto img = to_image(std::vector<double>{800.0, 8800.0},
                              std::vector<double>{0.0, 50.0});
    for (int c = 0; c < 256; c += 7) {
        const auto rows = marked_rows(img, c);
        REQUIRE(!rows.empty());
        const double t = static_cast<double>(c) / 255.0;
        const double expected_row = 255.0 * (1.0 - t);
        bool near = false;
        for (int r : rows)
            if (std::abs(r - expected_row) <= 1.0) near = true;
        CHECK(near);
    }
}

TEST_CASE("inversion flips background and curve") {
    const auto img = to_image(std::vector<double>{4800.0}, std::vector<double>{25.0});
    const auto inv = inverted(img);
    CHECK(inv.values()[128 * kImageSide + 128] == 1.0);
    CHECK(inv.values()[0] == 0.0);
    const auto twice = inverted(inv);
    CHECK(twice.values() == img.values());
}

TEST_CASE("encode_one shapes and the rest-frame image option") {
    const auto s = ramp_spectrum(4600, 2.0);
    CHECK(encode_one(s, Encoding::vector4761, 0.0).shape() ==
          (std::vector<std::size_t>{1, 4761}));
    CHECK(encode_one(s, Encoding::matrix69, 0.0).shape() ==
          (std::vector<std::size_t>{1, 69, 69}));
    CHECK(encode_one(s, Encoding::image256, 0.0).shape() ==
          (std::vector<std::size_t>{1, 256, 256}));

    // at z_em = 1 the rest-frame curve sits at half the observed wavelength
    const auto rest = encode_one(s, Encoding::image256, 1.0);
    EncodeOptions obs_frame;
    obs_frame.rest_frame = false;
    const auto observed = encode_one(s, Encoding::image256, 1.0, obs_frame);
    CHECK(rest.values() != observed.values());

    std::vector<double> half_wl(s.size()), fl = s.fluxes();
    for (std::size_t i = 0; i < s.size(); ++i) half_wl[i] = s.wavelengths()[i] / 2.0;
    const auto direct = inverted(to_image(half_wl, fl));
    CHECK(rest.values() == direct.values());
}

TEST_CASE("batches survive a disk round trip bit for bit") {
    EncodedBatch batch;
    batch.encoding = Encoding::matrix69;
    batch.shape = {69, 69};
    Rng rng(5);
    batch.labels = {0, 1, kNoLabel};
    batch.data.resize(3 * 69 * 69);
    for (auto& v : batch.data) v = static_cast<float>(rng.normal());

    const auto path = fs::temp_directory_path() / "transform_batch.benc";
    write_batch(batch, path);
    const auto back = read_batch(path);
    CHECK(back.encoding == batch.encoding);
    CHECK(back.shape == batch.shape);
    CHECK(back.labels == batch.labels);
    CHECK(back.data == batch.data);

    // to_tensor: unlabeled entries are -1 when labels are optional
    const auto [tensor, labels] = to_tensor(back, false);
    CHECK(tensor.shape() == (std::vector<std::size_t>{3, 69, 69}));
    CHECK(labels == std::vector<int>{0, 1, -1});
    CHECK(tensor.values()[0] == doctest::Approx(static_cast<double>(batch.data[0])));
    CHECK_THROWS_AS(to_tensor(back, true), std::invalid_argument);

    // corrupt the magic
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.put('Q');
    }
    CHECK_THROWS_AS(read_batch(path), io_error);
    fs::remove(path);
    CHECK_THROWS_AS(read_batch(path), io_error);
}

TEST_CASE("truncated batch files are rejected") {
    EncodedBatch batch;
    batch.encoding = Encoding::vector4761;
    batch.shape = {4761};
    batch.labels = {1};
    batch.data.resize(4761, 0.5f);
    const auto path = fs::temp_directory_path() / "transform_trunc.benc";
    write_batch(batch, path);
    const auto size = fs::file_size(path);
    fs::resize_file(path, size - 100);
    CHECK_THROWS_AS(read_batch(path), io_error);
    fs::remove(path);
}

TEST_CASE("encode_manifest encodes every record in manifest order") {
    const auto dir = fs::temp_directory_path() / "transform_ds";
    fs::remove_all(dir);
    simulate::DatasetConfig cfg;
    cfg.count = 12;
    cfg.out_dir = dir;
    cfg.master_seed = 9;
    const auto manifest = simulate::generate_dataset(cfg);

    const auto batch = encode_manifest(manifest, dir, Encoding::vector4761);
    REQUIRE(batch.count() == 12);
    CHECK(batch.shape == std::vector<std::size_t>{4761});
    for (std::size_t i = 0; i < 12; ++i)
        CHECK(batch.labels[i] ==
              (manifest.records[i].spec.label == simulate::Label::bump ? 1 : 0));

    // deterministic: encoding again gives identical floats
    const auto again = encode_manifest(manifest, dir, Encoding::vector4761);
    CHECK(batch.data == again.data);

    // spot check one record against a direct encoding
    const auto s = spectra::read_spectrum(dir / manifest.records[3].path);
    const auto one = to_vector(s);
    for (std::size_t j = 0; j < kVectorLength; ++j)
        CHECK(batch.data[3 * kVectorLength + j] ==
              static_cast<float>(one.data.values()[j]));

    // a missing spectrum file surfaces as an io_error
    auto broken = manifest;
    broken.records[5].path = "spectra/does_not_exist.txt";
    CHECK_THROWS_AS(encode_manifest(broken, dir, Encoding::vector4761), io_error);

    fs::remove_all(dir);
}
