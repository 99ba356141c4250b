#pragma once

// Minimal deterministic neural-network engine: dense and convolutional
// layers, max pooling, ReLU, terminal softmax, analytic backprop, plain SGD
// with step learning-rate decay. 64-bit floats throughout.
//
// Determinism: given (spec, config, dataset bytes, seed) the trained model is
// a bit-exact function of its inputs regardless of thread count. OpenMP
// parallelism only ever splits work across independent output elements or
// independent samples; every accumulation runs in a fixed order.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "bump/tensor.hpp"

namespace bump::tensornet {

struct DenseSpec {
    std::size_t out = 0;
};
// Stride-1, same-padding convolution.
struct ConvSpec {
    std::size_t filters = 0;
    std::size_t kh = 0;
    std::size_t kw = 0;
};
// 2x2, stride 2, floor mode.
struct MaxPoolSpec {};
struct ReluSpec {};
struct FlattenSpec {};
struct SoftmaxSpec {};

using LayerSpec =
    std::variant<DenseSpec, ConvSpec, MaxPoolSpec, ReluSpec, FlattenSpec, SoftmaxSpec>;

struct NetworkSpec {
    std::vector<std::size_t> input_shape;  // {features} or {channels, h, w}
    std::vector<LayerSpec> layers;
};

// Named presets:
//   FC{k}-{n}   : k hidden (Dense n + ReLU), then Dense 2 + Softmax, input 4761
//   CNN4-REF    : Conv5x5x50, Pool, Conv3x3x50, Pool, Conv3x3x50, Conv3x3x50,
//                 Pool, Flatten, Dense 256, ReLU, Dense 2, Softmax, input 69x69
//   CNN3-REF    : as CNN4-REF with one 3x3 conv per pool stage
//   CNN2-REF    : two-conv reduction of CNN4-REF
NetworkSpec preset(const std::string& name);

// Shape after the input and after each layer; throws on incompatible chains,
// on a non-terminal Softmax, and on non-positive dimensions.
std::vector<std::vector<std::size_t>> chain_shapes(const NetworkSpec& spec);

// Exact number of trainable weights + biases.
std::size_t param_count(const NetworkSpec& spec);

std::string spec_to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const std::string& text);
NetworkSpec load_spec(const std::filesystem::path& path);  // JSON file

struct LayerParams {
    Tensor w;  // Dense: {in, out}; Conv: {filters, in_ch, kh, kw}
    Tensor b;  // Dense: {out};     Conv: {filters}
    bool empty() const { return w.size() == 0 && b.size() == 0; }
};

struct Model {
    NetworkSpec spec;
    std::vector<LayerParams> params;  // one entry per layer, empty if layer has none
    std::uint64_t epoch = 0;
    std::string encoding;  // input encoding tag ("vector4761", ...) or empty
};

// He initialization: weights ~ N(0, 2/fan_in) drawn layer by layer in
// row-major order from a single seeded stream; biases zero.
Model init(const NetworkSpec& spec, std::uint64_t seed);

// Forward pass to class probabilities (N x classes); requires terminal
// Softmax. The batch is {N, ...input_shape}; a {N, H, W} batch is accepted
// for a {1, H, W} input.
Tensor forward(const Model& model, const Tensor& batch);

// Pre-softmax logits (N x classes).
Tensor logits(const Model& model, const Tensor& batch);

// Output of layer layer_index for the batch, {N, ...layer output shape}.
Tensor activation_at(const Model& model, const Tensor& batch, std::size_t layer_index);

struct Gradients {
    std::vector<LayerParams> layers;
    Tensor input;  // dLoss/dInput, batch-shaped
};

// Mean cross-entropy over the batch plus analytic gradients for every
// parameter and for the input. Labels are class indices. Optionally returns
// the forward probabilities.
double loss_and_grads(const Model& model, const Tensor& batch,
                      const std::vector<int>& labels, Gradients& grads,
                      Tensor* probs_out = nullptr);

// d(logit[target_class]) / d(input), computed on the pre-softmax logits.
Tensor logit_input_gradient(const Model& model, const Tensor& batch, int target_class);

struct Prediction {
    int cls = 0;       // 1 = bump
    double score = 0;  // P(class 1)
};

// Two-class prediction; class 1 iff score >= threshold.
std::vector<Prediction> predict(const Model& model, const Tensor& batch,
                                double threshold = 0.5);
// Memory-bounded inference over a large input set.
std::vector<Prediction> predict_chunked(const Model& model, const Tensor& inputs,
                                        double threshold = 0.5, std::size_t chunk = 32);

// Model container: magic "BMPK", u32 version, length-prefixed JSON spec
// block, parameter tensors as little-endian float64 in declaration order,
// trailing CRC-32 of all preceding bytes.
inline constexpr std::uint32_t kModelFormatVersion = 1;
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace bump::tensornet
