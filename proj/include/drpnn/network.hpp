#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "drpnn/conv_ops.hpp"
#include "drpnn/rng.hpp"
#include "drpnn/tensor.hpp"

namespace drpnn {

// Two-stage residual pan-sharpening network.
//
// Stage 1: layers 1..L-1 are conv+ReLU stacks under a skip connection; the
// body output is added to the input G, so the stack learns a residual.
// Stage 2: layer L projects the (S+1)-channel sum down to the S output bands
// with a final convolution and no activation.
//
// Channel plan: C_0 = S+1, interior layers use `hidden_channels`, and layer
// L-1 returns to S+1 channels so the skip addition typechecks; layer L maps
// S+1 -> S.
struct NetworkSpec {
    int layers = 11;           // L, counting the final projection layer
    int bands = 4;             // S, spectral band count of the MS image
    int hidden_channels = 64;  // interior layer width
    int filter_h = 7;
    int filter_w = 7;
    // Optional per-layer filter sizes {kh, kw}; when non-empty must have
    // exactly `layers` entries and overrides filter_h/filter_w.
    std::vector<std::array<int, 2>> per_layer_filters;
    // Whether the activation of layer L-1 is applied before the skip
    // addition (constraining the learned residual to be nonnegative).
    bool relu_before_skip = true;

    void validate() const {
        if (layers < 2) throw std::invalid_argument("NetworkSpec: layers must be >= 2");
        if (bands < 1) throw std::invalid_argument("NetworkSpec: bands must be >= 1");
        if (hidden_channels < 1) throw std::invalid_argument("NetworkSpec: hidden_channels must be >= 1");
        if (!per_layer_filters.empty() &&
            per_layer_filters.size() != static_cast<std::size_t>(layers)) {
            throw std::invalid_argument("NetworkSpec: per-layer filter list must have one entry per layer");
        }
        for (int l = 1; l <= layers; ++l) {
            auto [kh, kw] = filter_at(l);
            if (kh < 1 || kw < 1 || kh % 2 == 0 || kw % 2 == 0) {
                throw std::invalid_argument("NetworkSpec: filter sides must be odd and positive, layer " +
                                            std::to_string(l) + " has " + std::to_string(kh) + "x" +
                                            std::to_string(kw));
            }
        }
    }

    // C_l for l in [0, layers].
    int channels_at(int l) const {
        if (l < 0 || l > layers) throw std::invalid_argument("channels_at: layer index out of range");
        if (l == 0) return bands + 1;
        if (l == layers) return bands;
        if (l == layers - 1) return bands + 1;
        return hidden_channels;
    }

    // Filter size {kh, kw} of layer l in [1, layers].
    std::array<int, 2> filter_at(int l) const {
        if (l < 1 || l > layers) throw std::invalid_argument("filter_at: layer index out of range");
        if (!per_layer_filters.empty()) return per_layer_filters[static_cast<std::size_t>(l - 1)];
        return {filter_h, filter_w};
    }

    std::int64_t parameter_count() const {
        std::int64_t total = 0;
        for (int l = 1; l <= layers; ++l) {
            auto [kh, kw] = filter_at(l);
            const std::int64_t co = channels_at(l), ci = channels_at(l - 1);
            total += co * ci * kh * kw + co;
        }
        return total;
    }

    bool operator==(const NetworkSpec&) const = default;
};

// Ordered per-layer filter banks; layers[l-1] holds {W_l, b_l}. Also reused
// as the container for gradient sets and momentum velocities, which mirror
// the parameter shapes exactly.
template <typename T>
struct NetworkParams {
    std::vector<ConvKernel<T>> layers;

    void validate_against(const NetworkSpec& spec) const {
        if (layers.size() != static_cast<std::size_t>(spec.layers)) {
            throw std::invalid_argument("NetworkParams: have " + std::to_string(layers.size()) +
                                        " layers, spec wants " + std::to_string(spec.layers));
        }
        for (int l = 1; l <= spec.layers; ++l) {
            const ConvKernel<T>& k = layers[static_cast<std::size_t>(l - 1)];
            auto [kh, kw] = spec.filter_at(l);
            if (k.c_out() != spec.channels_at(l) || k.c_in() != spec.channels_at(l - 1) ||
                k.kh() != kh || k.kw() != kw) {
                throw std::invalid_argument("NetworkParams: layer " + std::to_string(l) + " has shape " +
                                            k.weights.dims().str() + ", spec wants (" +
                                            std::to_string(spec.channels_at(l)) + "," +
                                            std::to_string(spec.channels_at(l - 1)) + "," +
                                            std::to_string(kh) + "," + std::to_string(kw) + ")");
            }
        }
    }

    std::int64_t parameter_count() const {
        std::int64_t total = 0;
        for (const auto& k : layers) total += k.parameter_count();
        return total;
    }

    template <typename U>
    NetworkParams<U> cast() const {
        NetworkParams<U> out;
        out.layers.reserve(layers.size());
        for (const auto& k : layers) out.layers.push_back(k.template cast<U>());
        return out;
    }

    bool operator==(const NetworkParams&) const = default;
};

using NetworkParamsF = NetworkParams<float>;
using NetworkParamsD = NetworkParams<double>;

// Intermediate tensors captured by the forward pass for backpropagation.
template <typename T>
struct ForwardCache {
    Tensor<T> input;                // G = F_0
    std::vector<Tensor<T>> pre;     // pre-activation conv outputs, layers 1..L-1
    std::vector<Tensor<T>> post;    // post-activation outputs, layers 1..L-1
    Tensor<T> stage1;               // G + F_{L-1}
};

// Fan-in-scaled Gaussian weights (std = sqrt(2 / (C_{l-1} * kh * kw))),
// zero biases. Layer draws happen in layer order from a single seeded
// stream, so the result is fully determined by (spec, seed).
inline NetworkParamsF init_network(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    NetworkParamsF params;
    params.layers.reserve(static_cast<std::size_t>(spec.layers));
    for (int l = 1; l <= spec.layers; ++l) {
        auto [kh, kw] = spec.filter_at(l);
        ConvKernelF k(spec.channels_at(l), spec.channels_at(l - 1), kh, kw);
        const double stddev = std::sqrt(2.0 / (static_cast<double>(spec.channels_at(l - 1)) * kh * kw));
        float* w = k.weights.data();
        const std::int64_t count = k.weights.size();
        for (std::int64_t i = 0; i < count; ++i) {
            w[i] = static_cast<float>(stddev * rng.next_normal());
        }
        params.layers.push_back(std::move(k));
    }
    return params;
}

// Runs the two-stage forward pass. When `cache` is non-null every
// intermediate needed by backward() is captured.
template <typename T>
Tensor<T> forward(const NetworkParams<T>& params, const NetworkSpec& spec, const Tensor<T>& g,
                  ForwardCache<T>* cache = nullptr) {
    spec.validate();
    params.validate_against(spec);
    if (g.dims().c != spec.bands + 1) {
        throw std::invalid_argument("forward: input has " + std::to_string(g.dims().c) +
                                    " channels, spec wants S+1 = " + std::to_string(spec.bands + 1));
    }
    if (cache) {
        cache->input = g;
        cache->pre.clear();
        cache->post.clear();
    }
    Tensor<T> act = g;
    for (int l = 1; l <= spec.layers - 1; ++l) {
        Tensor<T> pre = conv2d_forward(act, params.layers[static_cast<std::size_t>(l - 1)]);
        const bool apply_relu = (l < spec.layers - 1) || spec.relu_before_skip;
        Tensor<T> post = apply_relu ? relu_forward(pre) : pre;
        if (cache) {
            cache->pre.push_back(std::move(pre));
            cache->post.push_back(post);
        }
        act = std::move(post);
    }
    Tensor<T> stage1 = add(g, act);
    Tensor<T> out = conv2d_forward(stage1, params.layers[static_cast<std::size_t>(spec.layers - 1)]);
    if (cache) cache->stage1 = std::move(stage1);
    return out;
}

// Exact chain-rule parameter gradients, including the skip path. Returns one
// kernel-shaped gradient per layer 1..L.
template <typename T>
NetworkParams<T> backward(const NetworkParams<T>& params, const NetworkSpec& spec,
                          const ForwardCache<T>& cache, const Tensor<T>& grad_f) {
    spec.validate();
    params.validate_against(spec);
    if (cache.pre.size() != static_cast<std::size_t>(spec.layers - 1) ||
        cache.post.size() != static_cast<std::size_t>(spec.layers - 1) ||
        cache.input.empty() || cache.stage1.empty()) {
        throw std::invalid_argument("backward: cache does not match a forward pass of this spec");
    }
    if (grad_f.dims().c != spec.bands) {
        throw std::invalid_argument("backward: grad has " + std::to_string(grad_f.dims().c) +
                                    " channels, spec wants S = " + std::to_string(spec.bands));
    }

    NetworkParams<T> grads;
    grads.layers.resize(static_cast<std::size_t>(spec.layers));

    // Layer L on the stage-1 sum.
    auto back_l = conv2d_backward(cache.stage1, params.layers[static_cast<std::size_t>(spec.layers - 1)], grad_f);
    grads.layers[static_cast<std::size_t>(spec.layers - 1)] = std::move(back_l.kernel_grad);

    // The stage-1 gradient feeds the body output; the identical quantity also
    // flows through the skip into G, which carries no parameters.
    Tensor<T> g = std::move(back_l.grad_input);
    for (int l = spec.layers - 1; l >= 1; --l) {
        const bool applied_relu = (l < spec.layers - 1) || spec.relu_before_skip;
        if (applied_relu) g = relu_backward(cache.pre[static_cast<std::size_t>(l - 1)], g);
        const Tensor<T>& layer_input = (l == 1) ? cache.input : cache.post[static_cast<std::size_t>(l - 2)];
        auto back = conv2d_backward(layer_input, params.layers[static_cast<std::size_t>(l - 1)], g);
        grads.layers[static_cast<std::size_t>(l - 1)] = std::move(back.kernel_grad);
        g = std::move(back.grad_input);
    }
    return grads;
}

// Binary checkpoint: magic, format version, spec fields, then raw
// little-endian float32 parameter data in layer order (weights then bias).
void save_checkpoint(const NetworkParamsF& params, const NetworkSpec& spec, const std::string& path);
std::pair<NetworkParamsF, NetworkSpec> load_checkpoint(const std::string& path);

}  // namespace drpnn
