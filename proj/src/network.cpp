#include "bump/network.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <regex>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "bump/errors.hpp"
#include "bump/matmul.hpp"
#include "bump/rng.hpp"

namespace bump::tensornet {

using json = nlohmann::ordered_json;

static_assert(std::endian::native == std::endian::little,
              "model container assumes a little-endian host");

namespace {

std::size_t product(const std::vector<std::size_t>& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                           std::multiplies<std::size_t>());
}

std::string shape_str(const std::vector<std::size_t>& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

}  // namespace

NetworkSpec preset(const std::string& name) {
    static const std::regex fc_re(R"(FC(\d+)-(\d+))");
    std::smatch m;
    if (std::regex_match(name, m, fc_re)) {
        const std::size_t depth = std::stoul(m[1]);
        const std::size_t width = std::stoul(m[2]);
        if (depth == 0 || width == 0)
            throw std::invalid_argument("preset: FC depth and width must be positive");
        NetworkSpec spec;
        spec.input_shape = {4761};
        for (std::size_t i = 0; i < depth; ++i) {
            spec.layers.push_back(DenseSpec{width});
            spec.layers.push_back(ReluSpec{});
        }
        spec.layers.push_back(DenseSpec{2});
        spec.layers.push_back(SoftmaxSpec{});
        return spec;
    }
    NetworkSpec spec;
    spec.input_shape = {1, 69, 69};
    const auto tail = [&spec] {
        spec.layers.push_back(FlattenSpec{});
        spec.layers.push_back(DenseSpec{256});
        spec.layers.push_back(ReluSpec{});
        spec.layers.push_back(DenseSpec{2});
        spec.layers.push_back(SoftmaxSpec{});
    };
    if (name == "CNN4-REF") {
        spec.layers = {ConvSpec{50, 5, 5}, MaxPoolSpec{}, ConvSpec{50, 3, 3},
                       MaxPoolSpec{},      ConvSpec{50, 3, 3}, ConvSpec{50, 3, 3},
                       MaxPoolSpec{}};
        tail();
        return spec;
    }
    if (name == "CNN3-REF") {
        spec.layers = {ConvSpec{50, 5, 5}, MaxPoolSpec{}, ConvSpec{50, 3, 3},
                       MaxPoolSpec{},      ConvSpec{50, 3, 3}, MaxPoolSpec{}};
        tail();
        return spec;
    }
    if (name == "CNN2-REF") {
        spec.layers = {ConvSpec{50, 5, 5}, MaxPoolSpec{}, ConvSpec{50, 3, 3},
                       MaxPoolSpec{}};
        tail();
        return spec;
    }
    throw std::invalid_argument("unknown network preset: " + name);
}

std::vector<std::vector<std::size_t>> chain_shapes(const NetworkSpec& spec) {
    if (spec.input_shape.empty())
        throw std::invalid_argument("network: empty input shape");
    for (std::size_t d : spec.input_shape)
        if (d == 0) throw std::invalid_argument("network: zero input dimension");
    if (spec.layers.empty()) throw std::invalid_argument("network: no layers");

    std::vector<std::vector<std::size_t>> shapes;
    shapes.push_back(spec.input_shape);
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const auto& cur = shapes.back();
        const bool last = (i + 1 == spec.layers.size());
        std::visit(
            [&](const auto& layer) {
                using T = std::decay_t<decltype(layer)>;
                if constexpr (std::is_same_v<T, DenseSpec>) {
                    if (cur.size() != 1)
                        throw std::invalid_argument("dense layer needs a flat input, got " +
                                                    shape_str(cur));
                    if (layer.out == 0)
                        throw std::invalid_argument("dense layer with zero outputs");
                    shapes.push_back({layer.out});
                } else if constexpr (std::is_same_v<T, ConvSpec>) {
                    if (cur.size() != 3)
                        throw std::invalid_argument(
                            "conv layer needs a (channels,h,w) input, got " + shape_str(cur));
                    if (layer.filters == 0 || layer.kh == 0 || layer.kw == 0)
                        throw std::invalid_argument("conv layer with zero size");
                    if (layer.kh % 2 == 0 || layer.kw % 2 == 0)
                        throw std::invalid_argument(
                            "conv kernel sides must be odd for same padding");
                    shapes.push_back({layer.filters, cur[1], cur[2]});
                } else if constexpr (std::is_same_v<T, MaxPoolSpec>) {
                    if (cur.size() != 3)
                        throw std::invalid_argument(
                            "maxpool needs a (channels,h,w) input, got " + shape_str(cur));
                    if (cur[1] < 2 || cur[2] < 2)
                        throw std::invalid_argument("maxpool input smaller than 2x2");
                    shapes.push_back({cur[0], cur[1] / 2, cur[2] / 2});
                } else if constexpr (std::is_same_v<T, FlattenSpec>) {
                    shapes.push_back({product(cur)});
                } else if constexpr (std::is_same_v<T, ReluSpec>) {
                    shapes.push_back(cur);
                } else if constexpr (std::is_same_v<T, SoftmaxSpec>) {
                    if (!last)
                        throw std::invalid_argument("softmax must be the final layer");
                    if (cur.size() != 1 || cur[0] < 2)
                        throw std::invalid_argument(
                            "softmax needs a flat input of at least two classes");
                    shapes.push_back(cur);
                }
            },
            spec.layers[i]);
    }
    return shapes;
}

std::size_t param_count(const NetworkSpec& spec) {
    const auto shapes = chain_shapes(spec);
    std::size_t total = 0;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const auto& in = shapes[i];
        std::visit(
            [&](const auto& layer) {
                using T = std::decay_t<decltype(layer)>;
                if constexpr (std::is_same_v<T, DenseSpec>)
                    total += in[0] * layer.out + layer.out;
                else if constexpr (std::is_same_v<T, ConvSpec>)
                    total += layer.filters * in[0] * layer.kh * layer.kw + layer.filters;
            },
            spec.layers[i]);
    }
    return total;
}

namespace {

json layer_to_json(const LayerSpec& layer) {
    return std::visit(
        [](const auto& l) -> json {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, DenseSpec>)
                return {{"type", "dense"}, {"out", l.out}};
            else if constexpr (std::is_same_v<T, ConvSpec>)
                return {{"type", "conv"}, {"filters", l.filters}, {"kh", l.kh}, {"kw", l.kw}};
            else if constexpr (std::is_same_v<T, MaxPoolSpec>)
                return {{"type", "maxpool"}};
            else if constexpr (std::is_same_v<T, ReluSpec>)
                return {{"type", "relu"}};
            else if constexpr (std::is_same_v<T, FlattenSpec>)
                return {{"type", "flatten"}};
            else
                return {{"type", "softmax"}};
        },
        layer);
}

LayerSpec layer_from_json(const json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "dense") return DenseSpec{j.at("out").get<std::size_t>()};
    if (type == "conv")
        return ConvSpec{j.at("filters").get<std::size_t>(), j.at("kh").get<std::size_t>(),
                        j.at("kw").get<std::size_t>()};
    if (type == "maxpool") return MaxPoolSpec{};
    if (type == "relu") return ReluSpec{};
    if (type == "flatten") return FlattenSpec{};
    if (type == "softmax") return SoftmaxSpec{};
    throw std::invalid_argument("unknown layer type: " + type);
}

json spec_to_json_obj(const NetworkSpec& spec) {
    json j;
    j["input"] = spec.input_shape;
    j["layers"] = json::array();
    for (const auto& l : spec.layers) j["layers"].push_back(layer_to_json(l));
    return j;
}

NetworkSpec spec_from_json_obj(const json& j) {
    if (j.contains("preset")) return preset(j.at("preset").get<std::string>());
    NetworkSpec spec;
    spec.input_shape = j.at("input").get<std::vector<std::size_t>>();
    for (const auto& l : j.at("layers")) spec.layers.push_back(layer_from_json(l));
    chain_shapes(spec);
    return spec;
}

}  // namespace

std::string spec_to_json(const NetworkSpec& spec) { return spec_to_json_obj(spec).dump(2); }

NetworkSpec spec_from_json(const std::string& text) {
    try {
        return spec_from_json_obj(json::parse(text));
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("network spec JSON: ") + e.what());
    }
}

NetworkSpec load_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open network spec " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return spec_from_json(buf.str());
}

Model init(const NetworkSpec& spec, std::uint64_t seed) {
    const auto shapes = chain_shapes(spec);
    Model model;
    model.spec = spec;
    model.params.resize(spec.layers.size());
    Rng rng(seed);
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const auto& in = shapes[i];
        std::visit(
            [&](const auto& layer) {
                using T = std::decay_t<decltype(layer)>;
                if constexpr (std::is_same_v<T, DenseSpec>) {
                    Tensor w({in[0], layer.out});
                    const double sd = std::sqrt(2.0 / static_cast<double>(in[0]));
                    for (double& v : w.values()) v = sd * rng.normal();
                    model.params[i].w = std::move(w);
                    model.params[i].b = Tensor({layer.out});
                } else if constexpr (std::is_same_v<T, ConvSpec>) {
                    Tensor w({layer.filters, in[0], layer.kh, layer.kw});
                    const double fan_in =
                        static_cast<double>(in[0] * layer.kh * layer.kw);
                    const double sd = std::sqrt(2.0 / fan_in);
                    for (double& v : w.values()) v = sd * rng.normal();
                    model.params[i].w = std::move(w);
                    model.params[i].b = Tensor({layer.filters});
                }
            },
            spec.layers[i]);
    }
    return model;
}

namespace {

// Activations per layer boundary plus pooling argmax caches (flat indices
// into the layer's input sample).
struct Trace {
    std::vector<Tensor> acts;
    std::vector<std::vector<std::uint32_t>> argmax;
};

Tensor normalize_batch(const NetworkSpec& spec, const Tensor& batch) {
    const auto& in = spec.input_shape;
    const auto& bs = batch.shape();
    if (bs.size() == in.size() + 1 &&
        std::equal(in.begin(), in.end(), bs.begin() + 1))
        return batch;
    if (in.size() == 3 && in[0] == 1 && bs.size() == 3 && bs[1] == in[1] &&
        bs[2] == in[2])
        return batch.reshaped({bs[0], 1, bs[1], bs[2]});
    throw std::invalid_argument("batch shape " + shape_str(bs) +
                                " does not match network input " + shape_str(in));
}

void im2col(const double* x, double* p, std::size_t c, std::size_t h, std::size_t w,
            std::size_t kh, std::size_t kw) {
    const std::size_t hw = h * w;
    const std::ptrdiff_t ph = static_cast<std::ptrdiff_t>((kh - 1) / 2);
    const std::ptrdiff_t pw = static_cast<std::ptrdiff_t>((kw - 1) / 2);
    std::size_t row = 0;
    for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t ki = 0; ki < kh; ++ki)
            for (std::size_t kj = 0; kj < kw; ++kj, ++row) {
                double* pr = p + row * hw;
                const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ki) - ph;
                const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kj) - pw;
                for (std::size_t yy = 0; yy < h; ++yy) {
                    const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(yy) + dy;
                    double* out = pr + yy * w;
                    if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) {
                        std::fill(out, out + w, 0.0);
                        continue;
                    }
                    const double* xr = x + ci * hw + static_cast<std::size_t>(sy) * w;
                    for (std::size_t xx = 0; xx < w; ++xx) {
                        const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(xx) + dx;
                        out[xx] = (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w))
                                      ? 0.0
                                      : xr[sx];
                    }
                }
            }
}

void col2im_add(const double* p, double* x, std::size_t c, std::size_t h,
                std::size_t w, std::size_t kh, std::size_t kw) {
    const std::size_t hw = h * w;
    const std::ptrdiff_t ph = static_cast<std::ptrdiff_t>((kh - 1) / 2);
    const std::ptrdiff_t pw = static_cast<std::ptrdiff_t>((kw - 1) / 2);
    std::size_t row = 0;
    for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t ki = 0; ki < kh; ++ki)
            for (std::size_t kj = 0; kj < kw; ++kj, ++row) {
                const double* pr = p + row * hw;
                const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ki) - ph;
                const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kj) - pw;
                for (std::size_t yy = 0; yy < h; ++yy) {
                    const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(yy) + dy;
                    if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
                    double* xr = x + ci * hw + static_cast<std::size_t>(sy) * w;
                    const double* in = pr + yy * w;
                    for (std::size_t xx = 0; xx < w; ++xx) {
                        const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(xx) + dx;
                        if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
                        xr[sx] += in[xx];
                    }
                }
            }
}

void conv_forward(const double* x, double* y, std::size_t n, std::size_t c,
                  std::size_t h, std::size_t w, const double* wmat,
                  const double* bias, std::size_t f, std::size_t kh,
                  std::size_t kw) {
    const std::size_t hw = h * w;
    const std::size_t k = c * kh * kw;
#pragma omp parallel
    {
        std::vector<double> patch(k * hw);
#pragma omp for schedule(static)
        for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(n); ++s) {
            im2col(x + static_cast<std::size_t>(s) * c * hw, patch.data(), c, h, w, kh,
                   kw);
            double* ys = y + static_cast<std::size_t>(s) * f * hw;
            matmul_serial(wmat, patch.data(), ys, f, k, hw);
            for (std::size_t fi = 0; fi < f; ++fi) {
                const double bv = bias[fi];
                double* row = ys + fi * hw;
                for (std::size_t p = 0; p < hw; ++p) row[p] += bv;
            }
        }
    }
}

void maxpool_forward(const double* x, double* y, std::uint32_t* arg, std::size_t n,
                     std::size_t c, std::size_t h, std::size_t w) {
    const std::size_t h2 = h / 2, w2 = w / 2;
    const std::size_t in_sample = c * h * w;
    const std::size_t out_sample = c * h2 * w2;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(n); ++s) {
        const double* xs = x + static_cast<std::size_t>(s) * in_sample;
        double* ys = y + static_cast<std::size_t>(s) * out_sample;
        std::uint32_t* as = arg ? arg + static_cast<std::size_t>(s) * out_sample : nullptr;
        std::size_t o = 0;
        for (std::size_t ci = 0; ci < c; ++ci)
            for (std::size_t oy = 0; oy < h2; ++oy)
                for (std::size_t ox = 0; ox < w2; ++ox, ++o) {
                    const std::size_t base = ci * h * w + 2 * oy * w + 2 * ox;
                    std::size_t best = base;
                    double bv = xs[base];
                    const std::size_t cand[3] = {base + 1, base + w, base + w + 1};
                    for (std::size_t idx : cand)
                        if (xs[idx] > bv) {
                            bv = xs[idx];
                            best = idx;
                        }
                    ys[o] = bv;
                    if (as) as[o] = static_cast<std::uint32_t>(best);
                }
    }
}

void softmax_rows(const double* x, double* y, std::size_t n, std::size_t k) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = x + i * k;
        double* yi = y + i * k;
        double m = xi[0];
        for (std::size_t j = 1; j < k; ++j) m = std::max(m, xi[j]);
        double sum = 0;
        for (std::size_t j = 0; j < k; ++j) {
            yi[j] = std::exp(xi[j] - m);
            sum += yi[j];
        }
        for (std::size_t j = 0; j < k; ++j) yi[j] /= sum;
    }
}

// Runs the network over a batch. With a trace, every intermediate
// activation is kept for backprop; without, only the running activation
// lives. through_softmax=false stops at the logits.
Tensor run_forward(const Model& model, const Tensor& raw_batch, Trace* trace,
                   bool through_softmax) {
    const auto& spec = model.spec;
    const auto shapes = chain_shapes(spec);
    Tensor cur = normalize_batch(spec, raw_batch);
    const std::size_t n = cur.dim(0);

    if (trace) {
        trace->acts.clear();
        trace->argmax.assign(spec.layers.size(), {});
        trace->acts.push_back(cur);
    }

    const auto batch_shape = [&](std::size_t layer_end) {
        std::vector<std::size_t> s{n};
        s.insert(s.end(), shapes[layer_end].begin(), shapes[layer_end].end());
        return s;
    };

    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        if (!through_softmax && std::holds_alternative<SoftmaxSpec>(spec.layers[i]))
            return cur;  // softmax is terminal by construction, cur holds the logits
        const auto& in_shape = shapes[i];
        Tensor next(batch_shape(i + 1));
        std::visit(
            [&](const auto& layer) {
                using T = std::decay_t<decltype(layer)>;
                if constexpr (std::is_same_v<T, DenseSpec>) {
                    const auto& w = model.params[i].w;
                    const auto& b = model.params[i].b;
                    matmul(cur.data(), w.data(), next.values().data(), n, in_shape[0],
                           layer.out);
                    double* out = next.values().data();
                    for (std::size_t r = 0; r < n; ++r)
                        for (std::size_t j = 0; j < layer.out; ++j)
                            out[r * layer.out + j] += b.data()[j];
                } else if constexpr (std::is_same_v<T, ConvSpec>) {
                    conv_forward(cur.data(), next.values().data(), n, in_shape[0],
                                 in_shape[1], in_shape[2], model.params[i].w.data(),
                                 model.params[i].b.data(), layer.filters, layer.kh,
                                 layer.kw);
                } else if constexpr (std::is_same_v<T, MaxPoolSpec>) {
                    std::uint32_t* arg = nullptr;
                    if (trace) {
                        trace->argmax[i].resize(next.size());
                        arg = trace->argmax[i].data();
                    }
                    maxpool_forward(cur.data(), next.values().data(), arg, n,
                                    in_shape[0], in_shape[1], in_shape[2]);
                } else if constexpr (std::is_same_v<T, ReluSpec>) {
                    const double* src = cur.data();
                    double* dst = next.values().data();
                    const std::size_t total = cur.size();
#pragma omp parallel for schedule(static)
                    for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(total);
                         ++p)
                        dst[p] = src[p] > 0.0 ? src[p] : 0.0;
                } else if constexpr (std::is_same_v<T, FlattenSpec>) {
                    std::copy(cur.data(), cur.data() + cur.size(),
                              next.values().data());
                } else if constexpr (std::is_same_v<T, SoftmaxSpec>) {
                    softmax_rows(cur.data(), next.values().data(), n, in_shape[0]);
                }
            },
            spec.layers[i]);
        cur = std::move(next);
        if (trace) trace->acts.push_back(cur);
    }
    return cur;
}

// Back-propagates dcur (gradient at the output of the last non-softmax
// layer, i.e. at the logits) down to the input. Parameter gradients are
// accumulated when grads is given.
Tensor run_backward(const Model& model, const Trace& trace, Tensor dcur,
                    Gradients* grads) {
    const auto& spec = model.spec;
    const auto shapes = chain_shapes(spec);
    const std::size_t n = trace.acts[0].dim(0);

    std::ptrdiff_t start = static_cast<std::ptrdiff_t>(spec.layers.size()) - 1;
    if (std::holds_alternative<SoftmaxSpec>(spec.layers.back())) --start;

    for (std::ptrdiff_t i = start; i >= 0; --i) {
        const auto ui = static_cast<std::size_t>(i);
        const auto& in_shape = shapes[ui];
        const Tensor& x = trace.acts[ui];
        Tensor dprev;
        std::visit(
            [&](const auto& layer) {
                using T = std::decay_t<decltype(layer)>;
                if constexpr (std::is_same_v<T, DenseSpec>) {
                    const std::size_t in = in_shape[0], out = layer.out;
                    const auto& w = model.params[ui].w;
                    if (grads) {
                        std::vector<double> xt(in * n);
                        transpose(x.data(), xt.data(), n, in);
                        matmul(xt.data(), dcur.data(),
                               grads->layers[ui].w.values().data(), in, n, out);
                        double* db = grads->layers[ui].b.values().data();
                        for (std::size_t r = 0; r < n; ++r) {
                            const double* row = dcur.data() + r * out;
                            for (std::size_t j = 0; j < out; ++j) db[j] += row[j];
                        }
                    }
                    std::vector<double> wt(out * in);
                    transpose(w.data(), wt.data(), in, out);
                    dprev = Tensor({n, in});
                    matmul(dcur.data(), wt.data(), dprev.values().data(), n, out, in);
                } else if constexpr (std::is_same_v<T, ConvSpec>) {
                    const std::size_t c = in_shape[0], h = in_shape[1], w2 = in_shape[2];
                    const std::size_t hw = h * w2;
                    const std::size_t k = c * layer.kh * layer.kw;
                    const std::size_t f = layer.filters;
                    const auto& wmat = model.params[ui].w;
                    std::vector<double> wt(k * f);
                    transpose(wmat.data(), wt.data(), f, k);
                    std::vector<std::size_t> dshape{n};
                    dshape.insert(dshape.end(), in_shape.begin(), in_shape.end());
                    dprev = Tensor(dshape);
                    std::vector<double> patch(k * hw), patch_t(hw * k), tmp(f * k),
                        dpatch(k * hw);
                    for (std::size_t s = 0; s < n; ++s) {
                        const double* xs = x.data() + s * c * hw;
                        const double* dys = dcur.data() + s * f * hw;
                        if (grads) {
                            im2col(xs, patch.data(), c, h, w2, layer.kh, layer.kw);
                            transpose(patch.data(), patch_t.data(), k, hw);
                            matmul(dys, patch_t.data(), tmp.data(), f, hw, k);
                            double* gw = grads->layers[ui].w.values().data();
                            for (std::size_t p = 0; p < f * k; ++p) gw[p] += tmp[p];
                            double* gb = grads->layers[ui].b.values().data();
                            for (std::size_t fi = 0; fi < f; ++fi) {
                                double acc = 0;
                                const double* row = dys + fi * hw;
                                for (std::size_t p = 0; p < hw; ++p) acc += row[p];
                                gb[fi] += acc;
                            }
                        }
                        matmul(wt.data(), dys, dpatch.data(), k, f, hw);
                        col2im_add(dpatch.data(),
                                   dprev.values().data() + s * c * hw, c, h, w2,
                                   layer.kh, layer.kw);
                    }
                } else if constexpr (std::is_same_v<T, MaxPoolSpec>) {
                    const std::size_t in_sample = product(in_shape);
                    const std::size_t out_sample = product(shapes[ui + 1]);
                    std::vector<std::size_t> dshape{n};
                    dshape.insert(dshape.end(), in_shape.begin(), in_shape.end());
                    dprev = Tensor(dshape);
                    const auto& arg = trace.argmax[ui];
#pragma omp parallel for schedule(static)
                    for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(n);
                         ++s) {
                        double* dx =
                            dprev.values().data() + static_cast<std::size_t>(s) * in_sample;
                        const double* dy =
                            dcur.data() + static_cast<std::size_t>(s) * out_sample;
                        const std::uint32_t* as =
                            arg.data() + static_cast<std::size_t>(s) * out_sample;
                        for (std::size_t o = 0; o < out_sample; ++o) dx[as[o]] += dy[o];
                    }
                } else if constexpr (std::is_same_v<T, ReluSpec>) {
                    dprev = Tensor(x.shape());
                    const double* xv = x.data();
                    const double* dy = dcur.data();
                    double* dx = dprev.values().data();
                    const std::size_t total = x.size();
#pragma omp parallel for schedule(static)
                    for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(total);
                         ++p)
                        dx[p] = xv[p] > 0.0 ? dy[p] : 0.0;
                } else if constexpr (std::is_same_v<T, FlattenSpec>) {
                    dprev = dcur.reshaped(x.shape());
                } else if constexpr (std::is_same_v<T, SoftmaxSpec>) {
                    throw std::logic_error("softmax inside backward chain");
                }
            },
            spec.layers[ui]);
        dcur = std::move(dprev);
    }
    return dcur;
}

void check_params(const Model& model) {
    if (model.params.size() != model.spec.layers.size())
        throw std::invalid_argument("model parameters do not match its layer list");
}

Gradients make_zero_grads(const Model& model) {
    Gradients g;
    g.layers.resize(model.params.size());
    for (std::size_t i = 0; i < model.params.size(); ++i) {
        if (model.params[i].empty()) continue;
        g.layers[i].w = Tensor(model.params[i].w.shape());
        g.layers[i].b = Tensor(model.params[i].b.shape());
    }
    return g;
}

}  // namespace

Tensor forward(const Model& model, const Tensor& batch) {
    check_params(model);
    if (!std::holds_alternative<SoftmaxSpec>(model.spec.layers.back()))
        throw std::invalid_argument("forward needs a terminal softmax layer");
    return run_forward(model, batch, nullptr, true);
}

Tensor logits(const Model& model, const Tensor& batch) {
    check_params(model);
    return run_forward(model, batch, nullptr, false);
}

Tensor activation_at(const Model& model, const Tensor& batch, std::size_t layer_index) {
    check_params(model);
    if (layer_index >= model.spec.layers.size())
        throw std::invalid_argument("layer index out of range");
    Trace trace;
    run_forward(model, batch, &trace, true);
    return trace.acts[layer_index + 1];
}

double loss_and_grads(const Model& model, const Tensor& batch,
                      const std::vector<int>& labels, Gradients& grads,
                      Tensor* probs_out) {
    check_params(model);
    if (!std::holds_alternative<SoftmaxSpec>(model.spec.layers.back()))
        throw std::invalid_argument("training needs a terminal softmax layer");
    Trace trace;
    Tensor probs = run_forward(model, batch, &trace, true);
    const std::size_t n = probs.dim(0);
    const std::size_t k = probs.dim(1);
    if (labels.size() != n)
        throw std::invalid_argument("label count does not match batch size");
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= k)
            throw std::invalid_argument("label out of range");

    double loss = 0;
    Tensor dlogits({n, k});
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* pi = probs.data() + i * k;
        double* di = dlogits.values().data() + i * k;
        const auto y = static_cast<std::size_t>(labels[i]);
        loss -= std::log(std::max(pi[y], 1e-300));
        for (std::size_t j = 0; j < k; ++j)
            di[j] = (pi[j] - (j == y ? 1.0 : 0.0)) * inv_n;
    }
    loss *= inv_n;

    grads = make_zero_grads(model);
    grads.input = run_backward(model, trace, std::move(dlogits), &grads);
    if (probs_out) *probs_out = std::move(probs);
    return loss;
}

Tensor logit_input_gradient(const Model& model, const Tensor& batch, int target_class) {
    check_params(model);
    Trace trace;
    run_forward(model, batch, &trace, true);
    const auto shapes = chain_shapes(model.spec);
    std::size_t logit_index = shapes.size() - 1;
    if (std::holds_alternative<SoftmaxSpec>(model.spec.layers.back())) --logit_index;
    const std::size_t k = shapes[logit_index][0];
    if (target_class < 0 || static_cast<std::size_t>(target_class) >= k)
        throw std::invalid_argument("target class out of range");
    const std::size_t n = trace.acts[0].dim(0);
    Tensor dlogits({n, k});
    for (std::size_t i = 0; i < n; ++i)
        dlogits.values()[i * k + static_cast<std::size_t>(target_class)] = 1.0;
    return run_backward(model, trace, std::move(dlogits), nullptr);
}

std::vector<Prediction> predict(const Model& model, const Tensor& batch,
                                double threshold) {
    Tensor probs = forward(model, batch);
    if (probs.dim(1) != 2)
        throw std::invalid_argument("predict expects a two-class network");
    std::vector<Prediction> out(probs.dim(0));
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].score = probs.data()[i * 2 + 1];
        out[i].cls = out[i].score >= threshold ? 1 : 0;
    }
    return out;
}

std::vector<Prediction> predict_chunked(const Model& model, const Tensor& inputs,
                                        double threshold, std::size_t chunk) {
    if (chunk == 0) throw std::invalid_argument("chunk must be positive");
    const std::size_t n = inputs.dim(0);
    const std::size_t sample = inputs.size() / n;
    std::vector<Prediction> out;
    out.reserve(n);
    for (std::size_t at = 0; at < n; at += chunk) {
        const std::size_t take = std::min(chunk, n - at);
        std::vector<std::size_t> shape = inputs.shape();
        shape[0] = take;
        Tensor part(shape, std::vector<double>(inputs.data() + at * sample,
                                               inputs.data() + (at + take) * sample));
        auto preds = predict(model, part, threshold);
        out.insert(out.end(), preds.begin(), preds.end());
    }
    return out;
}

namespace {

void append_u32(std::string& buf, std::uint32_t v) {
    char tmp[4];
    std::memcpy(tmp, &v, 4);
    buf.append(tmp, 4);
}

std::uint32_t read_u32(const std::string& buf, std::size_t at) {
    std::uint32_t v;
    std::memcpy(&v, buf.data() + at, 4);
    return v;
}

}  // namespace

void save_model(const Model& model, const std::filesystem::path& path) {
    check_params(model);
    chain_shapes(model.spec);

    json header;
    header["format"] = "bump-model";
    header["version"] = kModelFormatVersion;
    header["encoding"] = model.encoding;
    header["epoch"] = model.epoch;
    header["input"] = model.spec.input_shape;
    header["layers"] = json::array();
    for (const auto& l : model.spec.layers) header["layers"].push_back(layer_to_json(l));
    const std::string htext = header.dump();

    std::string buf;
    buf.append("BMPK", 4);
    append_u32(buf, kModelFormatVersion);
    append_u32(buf, static_cast<std::uint32_t>(htext.size()));
    buf += htext;
    for (const auto& p : model.params) {
        if (p.empty()) continue;
        buf.append(reinterpret_cast<const char*>(p.w.data()), p.w.size() * sizeof(double));
        buf.append(reinterpret_cast<const char*>(p.b.data()), p.b.size() * sizeof(double));
    }
    const auto crc = static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(buf.data()),
                static_cast<uInt>(buf.size())));
    append_u32(buf, crc);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open " + path.string() + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw io_error("short write to " + path.string());
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open model file " + path.string());
    std::string buf((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
    if (buf.size() < 16) throw io_error("model file " + path.string() + " is truncated");
    if (buf.compare(0, 4, "BMPK") != 0)
        throw io_error("model file " + path.string() + " has a bad magic number");
    const std::uint32_t version = read_u32(buf, 4);
    if (version != kModelFormatVersion)
        throw io_error("model file " + path.string() + " has unsupported version " +
                       std::to_string(version));
    const std::uint32_t stored_crc = read_u32(buf, buf.size() - 4);
    const auto actual_crc = static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(buf.data()),
                static_cast<uInt>(buf.size() - 4)));
    if (stored_crc != actual_crc)
        throw io_error("model file " + path.string() + " failed its checksum");

    const std::uint32_t hlen = read_u32(buf, 8);
    if (12 + static_cast<std::size_t>(hlen) + 4 > buf.size())
        throw io_error("model file " + path.string() + " has a bad header length");
    json header;
    try {
        header = json::parse(buf.substr(12, hlen));
    } catch (const json::exception& e) {
        throw io_error("model file " + path.string() + ": " + e.what());
    }

    Model model;
    try {
        model.spec.input_shape = header.at("input").get<std::vector<std::size_t>>();
        for (const auto& l : header.at("layers"))
            model.spec.layers.push_back(layer_from_json(l));
        model.epoch = header.value("epoch", std::uint64_t{0});
        model.encoding = header.value("encoding", std::string{});
    } catch (const json::exception& e) {
        throw io_error("model file " + path.string() + ": " + e.what());
    }

    const auto shapes = chain_shapes(model.spec);
    model.params.resize(model.spec.layers.size());
    std::size_t at = 12 + hlen;
    const std::size_t end = buf.size() - 4;
    for (std::size_t i = 0; i < model.spec.layers.size(); ++i) {
        const auto& in = shapes[i];
        std::visit(
            [&](const auto& layer) {
                using T = std::decay_t<decltype(layer)>;
                std::vector<std::size_t> wshape, bshape;
                if constexpr (std::is_same_v<T, DenseSpec>) {
                    wshape = {in[0], layer.out};
                    bshape = {layer.out};
                } else if constexpr (std::is_same_v<T, ConvSpec>) {
                    wshape = {layer.filters, in[0], layer.kh, layer.kw};
                    bshape = {layer.filters};
                } else {
                    return;
                }
                Tensor w(wshape), b(bshape);
                const std::size_t bytes = (w.size() + b.size()) * sizeof(double);
                if (at + bytes > end)
                    throw io_error("model file " + path.string() +
                                   " is missing parameter data");
                std::memcpy(w.values().data(), buf.data() + at, w.size() * sizeof(double));
                std::memcpy(b.values().data(), buf.data() + at + w.size() * sizeof(double),
                            b.size() * sizeof(double));
                at += bytes;
                model.params[i].w = std::move(w);
                model.params[i].b = std::move(b);
            },
            model.spec.layers[i]);
    }
    if (at != end)
        throw io_error("model file " + path.string() + " has trailing parameter data");
    return model;
}

}  // namespace bump::tensornet
