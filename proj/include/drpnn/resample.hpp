#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "drpnn/optimizer.hpp"
#include "drpnn/tensor.hpp"

namespace drpnn {

namespace detail {

// Keys cubic convolution kernel, a = -0.5. Support (-2, 2), weights over the
// integer grid sum to 1 at every phase.
inline double keys_weight(double t) {
    t = std::abs(t);
    if (t <= 1.0) return (1.5 * t - 2.5) * t * t + 1.0;
    if (t < 2.0) return ((-0.5 * t + 2.5) * t - 4.0) * t + 2.0;
    return 0.0;
}

// Tap table for one axis: for every output index, the clamped source indices
// and weights to accumulate, in ascending source order.
struct AxisTaps {
    int taps_per_output = 0;
    std::vector<int> indices;      // taps_per_output entries per output index
    std::vector<double> weights;
};

AxisTaps upsample_taps(int in_len, int scale);
AxisTaps downsample_taps(int in_len, int scale);

}  // namespace detail

// Per-band bicubic interpolation to `scale` times the spatial size.
// Half-pixel-centered coordinate mapping, edge-clamped sampling; channels are
// processed independently. Accumulation runs in double.
template <typename T>
Tensor<T> bicubic_upsample(const Tensor<T>& img, int scale);

// Anti-aliased bicubic reduction by `scale`: the Keys kernel stretched by the
// scale factor (4*scale taps per axis), weights renormalized to sum 1.
// Spatial dims must be divisible by `scale`.
template <typename T>
Tensor<T> bicubic_downsample(const Tensor<T>& img, int scale);

// Co-registered MS + PAN observation; `truth` is the full-resolution MS
// reference when one exists (reduced-scale evaluation scenes).
struct ScenePair {
    TensorF ms;   // (1, S, H/scale, W/scale)
    TensorF pan;  // (1, 1, H, W)
    int scale = 4;
    std::optional<TensorF> truth;  // (1, S, H, W)

    void validate() const;
};

// G = {G_MS, g_PAN}: bicubic-upsampled MS bands stacked with the untouched
// PAN band, dims (1, S+1, H, W). PAN values pass through bitwise.
TensorF build_input(const ScenePair& scene);

// Reduced-scale observation for protocol evaluation: both bands of the scene
// are downsampled by its scale factor and the original MS becomes the ground
// truth. The input scene must not already carry a truth image.
ScenePair wald_simulate(const ScenePair& scene);

// Builds G once, then slides a patch x patch window with the given stride
// over G and truth in lockstep. Pair order is shuffled by `seed`.
std::vector<PatchPair> extract_patches(const ScenePair& scene, int patch, int stride,
                                       std::uint64_t seed);

// ---- template definitions ----

namespace detail {

template <typename T>
Tensor<T> resample_2d(const Tensor<T>& img, const AxisTaps& row_taps, const AxisTaps& col_taps,
                      int out_h, int out_w) {
    const Dims d = img.dims();
    Tensor<T> out(Dims{d.n, d.c, out_h, out_w});
    std::vector<double> horiz(static_cast<std::size_t>(d.h) * out_w);
    for (int n = 0; n < d.n; ++n) {
        for (int c = 0; c < d.c; ++c) {
            // Horizontal pass: (h, w) -> (h, out_w), double intermediate.
            for (int y = 0; y < d.h; ++y) {
                const T* src = img.row(n, c, y);
                double* dst = horiz.data() + static_cast<std::size_t>(y) * out_w;
                for (int x = 0; x < out_w; ++x) {
                    const int* idx = col_taps.indices.data() + static_cast<std::size_t>(x) * col_taps.taps_per_output;
                    const double* wt = col_taps.weights.data() + static_cast<std::size_t>(x) * col_taps.taps_per_output;
                    double acc = 0.0;
                    for (int t = 0; t < col_taps.taps_per_output; ++t) acc += wt[t] * static_cast<double>(src[idx[t]]);
                    dst[x] = acc;
                }
            }
            // Vertical pass: (h, out_w) -> (out_h, out_w).
            for (int y = 0; y < out_h; ++y) {
                const int* idx = row_taps.indices.data() + static_cast<std::size_t>(y) * row_taps.taps_per_output;
                const double* wt = row_taps.weights.data() + static_cast<std::size_t>(y) * row_taps.taps_per_output;
                T* dst = out.row(n, c, y);
                for (int x = 0; x < out_w; ++x) {
                    double acc = 0.0;
                    for (int t = 0; t < row_taps.taps_per_output; ++t) {
                        acc += wt[t] * horiz[static_cast<std::size_t>(idx[t]) * out_w + x];
                    }
                    dst[x] = static_cast<T>(acc);
                }
            }
        }
    }
    return out;
}

}  // namespace detail

template <typename T>
Tensor<T> bicubic_upsample(const Tensor<T>& img, int scale) {
    if (scale < 2) throw std::invalid_argument("bicubic_upsample: scale must be >= 2");
    const Dims d = img.dims();
    const auto row_taps = detail::upsample_taps(d.h, scale);
    const auto col_taps = detail::upsample_taps(d.w, scale);
    return detail::resample_2d(img, row_taps, col_taps, d.h * scale, d.w * scale);
}

template <typename T>
Tensor<T> bicubic_downsample(const Tensor<T>& img, int scale) {
    if (scale < 2) throw std::invalid_argument("bicubic_downsample: scale must be >= 2");
    const Dims d = img.dims();
    if (d.h % scale != 0 || d.w % scale != 0) {
        const int ch = (d.h / scale) * scale;
        const int cw = (d.w / scale) * scale;
        throw std::invalid_argument("bicubic_downsample: dims " + std::to_string(d.h) + "x" +
                                    std::to_string(d.w) + " not divisible by scale " +
                                    std::to_string(scale) + "; crop to " + std::to_string(ch) +
                                    "x" + std::to_string(cw) + " first");
    }
    const auto row_taps = detail::downsample_taps(d.h, scale);
    const auto col_taps = detail::downsample_taps(d.w, scale);
    return detail::resample_2d(img, row_taps, col_taps, d.h / scale, d.w / scale);
}

}  // namespace drpnn
