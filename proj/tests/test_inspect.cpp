#include <cctype>
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"

#include "bump/inspect.hpp"
#include "bump/network.hpp"
#include "bump/rng.hpp"
#include "bump/spectra.hpp"
#include "bump/svgplot.hpp"

using namespace bump;
using namespace bump::inspect;

namespace {

// Minimal XML well-formedness check: balanced, properly nested tags.
// Handles declarations, comments and self-closing elements; no entities
// beyond the five standard ones.
bool xml_well_formed(const std::string& text) {
    std::vector<std::string> stack;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        if (text[i] != '<') {
            if (text[i] == '>') return false;
            if (text[i] == '&') {
                const auto semi = text.find(';', i);
                if (semi == std::string::npos || semi - i > 6) return false;
                i = semi;
            }
            ++i;
            continue;
        }
        if (text.compare(i, 4, "<!--") == 0) {
            const auto end = text.find("-->", i);
            if (end == std::string::npos) return false;
            i = end + 3;
            continue;
        }
        if (text.compare(i, 2, "<?") == 0) {
            const auto end = text.find("?>", i);
            if (end == std::string::npos) return false;
            i = end + 2;
            continue;
        }
        const auto close = text.find('>', i);
        if (close == std::string::npos) return false;
        std::string tag = text.substr(i + 1, close - i - 1);
        bool closing = false, self_closing = false;
        if (!tag.empty() && tag.front() == '/') {
            closing = true;
            tag.erase(0, 1);
        }
        if (!tag.empty() && tag.back() == '/') {
            self_closing = true;
            tag.pop_back();
        }
        const auto space = tag.find_first_of(" \t\r\n");
        const std::string name = tag.substr(0, space);
        if (name.empty()) return false;
        if (closing) {
            if (stack.empty() || stack.back() != name) return false;
            stack.pop_back();
        } else if (!self_closing) {
            stack.push_back(name);
        }
        i = close + 1;
    }
    return stack.empty();
}

spectra::Spectrum toy_spectrum() {
    std::vector<double> wl, fl;
    for (int i = 0; i < 50; ++i) {
        wl.push_back(4000.0 + 100.0 * i);
        fl.push_back(1.0 + std::sin(i * 0.2));
    }
    return spectra::Spectrum(wl, fl);
}

}  // namespace

TEST_CASE("the sanity checker accepts good XML and rejects bad XML") {
    CHECK(xml_well_formed("<?xml version=\"1.0\"?><a><b x=\"1\"/>text</a>"));
    CHECK(!xml_well_formed("<a><b></a></b>"));
    CHECK(!xml_well_formed("<a>"));
    CHECK(!xml_well_formed("<a>5 < 6</a>"));
}

TEST_CASE("tiling lays maps on a square-ish grid with separators") {
    std::vector<Tensor> maps;
    Rng rng(1);
    for (int f = 0; f < 50; ++f) {
        Tensor m({5, 5});
        for (double& v : m.values()) v = rng.uniform01();
        maps.push_back(m);
    }
    const auto canvas = tile(maps);
    // 8 columns, 7 rows of 5x5 tiles with 1-pixel separators
    REQUIRE(canvas.rank() == 2);
    CHECK(canvas.dim(0) == 7 * 5 + 6);
    CHECK(canvas.dim(1) == 8 * 5 + 7);

    const std::size_t w = canvas.dim(1);
    // separator row and column are white
    CHECK(canvas.values()[5 * w + 0] == 1.0);
    CHECK(canvas.values()[0 * w + 5] == 1.0);
    // first tile reproduces the first map
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t c = 0; c < 5; ++c)
            CHECK(canvas.values()[r * w + c] == maps[0].values()[r * 5 + c]);
    // the 56th cell does not exist: bottom-right block stays white
    CHECK(canvas.values()[(6 * 6) * w + (7 * 6)] == 1.0);

    const auto single = tile({maps[0]});
    CHECK(single.dim(0) == 5);
    CHECK(single.dim(1) == 5);
    CHECK(single.values() == maps[0].values());

    CHECK_THROWS_AS(tile({}), std::invalid_argument);
}

TEST_CASE("filter rendering normalizes per filter and averages channels") {
    tensornet::NetworkSpec spec;
    spec.input_shape = {2, 8, 8};
    spec.layers = {tensornet::ConvSpec{2, 3, 3}, tensornet::FlattenSpec{},
                   tensornet::DenseSpec{2}, tensornet::SoftmaxSpec{}};
    auto model = tensornet::init(spec, 2);

    // filter 0: constant (zero range -> 0.5); filter 1: channel-mean ramp
    auto& w = model.params[0].w.values();  // {2, 2, 3, 3}
    for (std::size_t i = 0; i < 18; ++i) w[i] = 3.0;
    for (std::size_t i = 0; i < 9; ++i) {
        w[18 + i] = static_cast<double>(i);       // channel 0
        w[18 + 9 + i] = static_cast<double>(i);   // channel 1, same ramp
    }

    const auto img = render_filters(model, 0);
    REQUIRE(img.rank() == 2);
    CHECK(img.dim(0) == 3);       // one row of two 3x3 tiles
    CHECK(img.dim(1) == 3 + 1 + 3);

    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 3; ++c)
            CHECK(img.values()[r * 7 + c] == 0.5);
    // ramp normalizes to 0..1 across the tile
    CHECK(img.values()[0 * 7 + 4] == 0.0);
    CHECK(img.values()[2 * 7 + 6] == 1.0);

    CHECK_THROWS_AS(render_filters(model, 1), std::invalid_argument);
    CHECK_THROWS_AS(render_filters(model, 9), std::invalid_argument);
}

TEST_CASE("feature maps come back one per filter, normalized") {
    tensornet::NetworkSpec spec;
    spec.input_shape = {1, 10, 10};
    spec.layers = {tensornet::ConvSpec{4, 3, 3}, tensornet::ReluSpec{},
                   tensornet::MaxPoolSpec{}, tensornet::FlattenSpec{},
                   tensornet::DenseSpec{2}, tensornet::SoftmaxSpec{}};
    const auto model = tensornet::init(spec, 3);

    Tensor input({1, 1, 10, 10});
    Rng rng(4);
    for (double& v : input.values()) v = rng.uniform01();

    const auto maps = feature_maps(model, input, 0);
    REQUIRE(maps.size() == 4);
    for (const auto& m : maps) {
        CHECK(m.shape() == (std::vector<std::size_t>{10, 10}));
        for (double v : m.values()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }

    const auto pooled = feature_maps(model, input, 2);
    REQUIRE(pooled.size() == 4);
    CHECK(pooled[0].shape() == (std::vector<std::size_t>{5, 5}));

    // flat layers have no spatial maps
    CHECK_THROWS_AS(feature_maps(model, input, 3), std::invalid_argument);
}

TEST_CASE("input reconstruction is seeded and climbs the target logit") {
    tensornet::NetworkSpec spec;
    spec.input_shape = {1, 12, 12};
    spec.layers = {tensornet::ConvSpec{3, 3, 3}, tensornet::ReluSpec{},
                   tensornet::FlattenSpec{}, tensornet::DenseSpec{2},
                   tensornet::SoftmaxSpec{}};
    const auto model = tensornet::init(spec, 5);

    const auto a = reconstruct_input(model, 1, 25, 0.05, 9);
    const auto b = reconstruct_input(model, 1, 25, 0.05, 9);
    const auto c = reconstruct_input(model, 1, 25, 0.05, 10);
    CHECK(a.input.values() == b.input.values());
    CHECK(a.input.values() != c.input.values());

    REQUIRE(a.logit_trajectory.size() == 26);
    CHECK(a.logit_trajectory.back() > a.logit_trajectory.front());
    for (double v : a.input.values()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }

    const auto noise = reconstruct_input(model, 0, 0, 0.05, 9);
    CHECK(noise.logit_trajectory.size() == 1);
    for (double v : noise.input.values()) {
        CHECK(v >= 0.4);
        CHECK(v <= 0.6);
    }

    CHECK_THROWS_AS(reconstruct_input(model, 5, 10, 0.05, 9), std::invalid_argument);
}

TEST_CASE("spectrum plots are well-formed SVG with one polyline per curve") {
    const auto s = toy_spectrum();
    const auto alone = plot_spectrum_svg(s);
    CHECK(xml_well_formed(alone));

    std::size_t polylines = 0;
    for (std::size_t pos = 0; (pos = alone.find("<polyline", pos)) != std::string::npos;
         ++polylines)
        ++pos;
    CHECK(polylines == 1);

    Overlay o1{"fit & model", s.wavelengths(), s.fluxes()};
    Overlay o2{"fit <no bump>", s.wavelengths(), s.fluxes()};
    const auto with = plot_spectrum_svg(s, {o1, o2});
    CHECK(xml_well_formed(with));
    polylines = 0;
    for (std::size_t pos = 0; (pos = with.find("<polyline", pos)) != std::string::npos;
         ++polylines)
        ++pos;
    CHECK(polylines == 3);
    // names with XML metacharacters must be escaped, not emitted raw
    CHECK(with.find("fit & model") == std::string::npos);
    CHECK(with.find("fit &amp; model") != std::string::npos);
    CHECK(with.find("fit &lt;no bump&gt;") != std::string::npos);
}

TEST_CASE("the plot layout maps data corners to the margins") {
    svgplot::PlotLayout layout;
    layout.x_min = 2.0;
    layout.x_max = 4.0;
    layout.y_min = -1.0;
    layout.y_max = 3.0;
    CHECK(layout.px_of(2.0) == doctest::Approx(60.0));
    CHECK(layout.px_of(4.0) == doctest::Approx(740.0));
    CHECK(layout.px_of(3.0) == doctest::Approx(400.0));
    CHECK(layout.py_of(-1.0) == doctest::Approx(440.0));
    CHECK(layout.py_of(3.0) == doctest::Approx(60.0));
    CHECK(layout.py_of(1.0) == doctest::Approx(250.0));
}

TEST_CASE("layout_for pads degenerate ranges") {
    svgplot::Series flat{"flat", {1.0, 2.0}, {5.0, 5.0}};
    const auto layout = svgplot::layout_for({flat});
    CHECK(layout.y_min < 5.0);
    CHECK(layout.y_max > 5.0);
    CHECK(layout.x_min == doctest::Approx(1.0));
    CHECK(layout.x_max == doctest::Approx(2.0));
}

TEST_CASE("line charts escape titles and stay well-formed") {
    svgplot::Series s{"series", {0.0, 1.0, 2.0}, {0.0, 1.0, 0.5}};
    const auto layout = svgplot::layout_for({s});
    const auto svg = svgplot::render_line_chart({s}, layout, "a < b & c", "x", "y");
    CHECK(xml_well_formed(svg));
    CHECK(svg.find("a &lt; b &amp; c") != std::string::npos);
}
