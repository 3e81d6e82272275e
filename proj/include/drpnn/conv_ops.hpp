#pragma once

#include <algorithm>
#include <cstring>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include "drpnn/tensor.hpp"

namespace drpnn {

// Direct 2-D convolution (cross-correlation) with centered zero "same"
// padding, plus its exact adjoints. Spatial size is always preserved.
//
// Reproducibility contract: for each output entry the floating-point
// accumulation order is fixed — (c_in, dy, dx) in the forward pass and
// (n, y, x) for the weight/bias gradients. The float fast path below keeps
// that order bit-exactly: its SIMD lanes hold *different* entries (output
// pixels or kernel taps), never partial sums of one entry, and out-of-range
// taps enter as exact +-0 products, which is what the zero-padding formula
// prescribes. The project builds with -ffp-contract=off so every multiply
// and add rounds individually in both paths.

namespace detail {

template <typename T>
void check_forward_args(const Tensor<T>& input, const ConvKernel<T>& kernel) {
    kernel.validate();
    if (input.dims().c != kernel.c_in()) {
        throw std::invalid_argument("conv2d_forward: input has " + std::to_string(input.dims().c) +
                                    " channels but kernel expects " + std::to_string(kernel.c_in()));
    }
}

#if defined(__GNUC__) || defined(__clang__)
#define DRPNN_HAVE_VEC8 1
typedef float v8f __attribute__((vector_size(32)));

inline v8f load8(const float* p) {
    v8f v;
    std::memcpy(&v, p, sizeof v);
    return v;
}
inline void store8(float* p, v8f v) { std::memcpy(p, &v, sizeof v); }
inline v8f splat8(float x) { return v8f{x, x, x, x, x, x, x, x}; }

// Image rows with `pad_left` zeros before each row and enough zeros after it
// that an 8-wide load at any tap offset stays in bounds.
class PaddedRowsF32 {
public:
    PaddedRowsF32(const Tensor<float>& t, int pad_left)
        : pad_left_(pad_left), width_(t.dims().w), stride_(pad_left + t.dims().w + kPadRight) {
        const Dims d = t.dims();
        rows_per_image_ = d.c * d.h;
        buf_.assign(static_cast<std::size_t>(d.n) * rows_per_image_ * stride_, 0.0f);
        for (int n = 0; n < d.n; ++n) {
            for (int c = 0; c < d.c; ++c) {
                for (int y = 0; y < d.h; ++y) {
                    std::memcpy(buf_.data() + row_offset(n, c, y, d) + pad_left_, t.row(n, c, y),
                                sizeof(float) * static_cast<std::size_t>(width_));
                }
            }
        }
        dims_ = d;
    }

    // Pointer to padded row start; index pad_left is the first real pixel.
    const float* row(int n, int c, int y) const { return buf_.data() + row_offset(n, c, y, dims_); }

    static constexpr int kPadRight = 24;  // covers 8-wide loads for taps up to 15

private:
    std::size_t row_offset(int n, int c, int y, const Dims& d) const {
        return (static_cast<std::size_t>(n) * rows_per_image_ +
                static_cast<std::size_t>(c) * d.h + static_cast<std::size_t>(y)) *
               stride_;
    }

    int pad_left_;
    int width_;
    std::size_t stride_;
    std::size_t rows_per_image_;
    Dims dims_;
    std::vector<float> buf_;
};

inline bool fast_f32_applicable(int kw) { return kw <= 15; }

// out[y][x] (+)= bias + sum_{i,dy,dx} w * in, vector lanes across x.
inline Tensor<float> conv2d_forward_f32(const Tensor<float>& input, const ConvKernel<float>& kernel) {
    const Dims d = input.dims();
    const int kh = kernel.kh(), kw = kernel.kw();
    const int ph = (kh - 1) / 2, pw = (kw - 1) / 2;
    const PaddedRowsF32 pin(input, pw);
    Tensor<float> out(Dims{d.n, kernel.c_out(), d.h, d.w});
    const int xb = d.w & ~7;

    for (int n = 0; n < d.n; ++n) {
        for (int o = 0; o < kernel.c_out(); ++o) {
            const float b = kernel.bias[static_cast<std::size_t>(o)];
            for (int y = 0; y < d.h; ++y) {
                float* __restrict out_row = out.row(n, o, y);
                for (int x = 0; x < d.w; ++x) out_row[x] = b;
            }
            for (int i = 0; i < d.c; ++i) {
                for (int dy = 0; dy < kh; ++dy) {
                    const int y0 = std::max(0, ph - dy);
                    const int y1 = std::min(d.h, d.h + ph - dy);
                    const float* __restrict wk = kernel.weights.row(o, i, dy);
                    for (int y = y0; y < y1; ++y) {
                        const float* __restrict prow = pin.row(n, i, y + dy - ph);
                        float* __restrict out_row = out.row(n, o, y);
                        for (int x = 0; x < xb; x += 8) {
                            v8f acc = load8(out_row + x);
                            for (int dx = 0; dx < kw; ++dx) {
                                acc += splat8(wk[dx]) * load8(prow + x + dx);
                            }
                            store8(out_row + x, acc);
                        }
                        for (int x = xb; x < d.w; ++x) {
                            float acc = out_row[x];
                            for (int dx = 0; dx < kw; ++dx) acc += wk[dx] * prow[x + dx];
                            out_row[x] = acc;
                        }
                    }
                }
            }
        }
    }
    return out;
}

// grad_weights rows for one (o, i, dy): vector lanes across dx.
inline void grad_weights_rows_f32(const PaddedRowsF32& pin, const Tensor<float>& grad_output,
                                  int o, int i, int dy, int ph, int kw, float* acc_row) {
    const Dims d = grad_output.dims();
    const int h = d.h, w = d.w;
    float stage[16] = {};
    for (int dx = 0; dx < kw; ++dx) stage[dx] = acc_row[dx];
    v8f a0 = load8(stage);
    v8f a1 = load8(stage + 8);
    const bool two = kw > 8;
    for (int n = 0; n < d.n; ++n) {
        for (int y = 0; y < h; ++y) {
            const int iy = y + dy - ph;
            if (iy < 0 || iy >= h) continue;
            const float* __restrict go_row = grad_output.row(n, o, y);
            const float* __restrict prow = pin.row(n, i, iy);
            if (two) {
                for (int x = 0; x < w; ++x) {
                    const v8f g = splat8(go_row[x]);
                    a0 += g * load8(prow + x);
                    a1 += g * load8(prow + x + 8);
                }
            } else {
                for (int x = 0; x < w; ++x) {
                    a0 += splat8(go_row[x]) * load8(prow + x);
                }
            }
        }
    }
    store8(stage, a0);
    store8(stage + 8, a1);
    for (int dx = 0; dx < kw; ++dx) acc_row[dx] = stage[dx];
}

// grad_input rows: vector lanes across x, flipped tap offsets.
inline Tensor<float> grad_input_f32(const PaddedRowsF32& pgo, const ConvKernel<float>& kernel,
                                    const Dims& d) {
    const int kh = kernel.kh(), kw = kernel.kw();
    const int ph = (kh - 1) / 2;
    Tensor<float> gi(d);
    const int xb = d.w & ~7;
    for (int n = 0; n < d.n; ++n) {
        for (int i = 0; i < kernel.c_in(); ++i) {
            for (int o = 0; o < kernel.c_out(); ++o) {
                for (int dy = 0; dy < kh; ++dy) {
                    const int y0 = std::max(0, dy - ph);
                    const int y1 = std::min(d.h, d.h + dy - ph);
                    const float* __restrict wk = kernel.weights.row(o, i, dy);
                    for (int y = y0; y < y1; ++y) {
                        const float* __restrict prow = pgo.row(n, o, y - dy + ph);
                        float* __restrict gi_row = gi.row(n, i, y);
                        for (int x = 0; x < xb; x += 8) {
                            v8f acc = load8(gi_row + x);
                            for (int dx = 0; dx < kw; ++dx) {
                                acc += splat8(wk[dx]) * load8(prow + x + (kw - 1) - dx);
                            }
                            store8(gi_row + x, acc);
                        }
                        for (int x = xb; x < d.w; ++x) {
                            float acc = gi_row[x];
                            for (int dx = 0; dx < kw; ++dx) {
                                acc += wk[dx] * prow[x + (kw - 1) - dx];
                            }
                            gi_row[x] = acc;
                        }
                    }
                }
            }
        }
    }
    return gi;
}
#else
inline bool fast_f32_applicable(int) { return false; }
#endif  // DRPNN_HAVE_VEC8

}  // namespace detail

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const ConvKernel<T>& kernel) {
    detail::check_forward_args(input, kernel);
    const Dims d = input.dims();
    const int kh = kernel.kh(), kw = kernel.kw();
    const int ph = (kh - 1) / 2, pw = (kw - 1) / 2;

#ifdef DRPNN_HAVE_VEC8
    if constexpr (std::is_same_v<T, float>) {
        if (detail::fast_f32_applicable(kw)) return detail::conv2d_forward_f32(input, kernel);
    }
#endif

    Tensor<T> out(Dims{d.n, kernel.c_out(), d.h, d.w});
    for (int n = 0; n < d.n; ++n) {
        for (int o = 0; o < kernel.c_out(); ++o) {
            const T b = kernel.bias[static_cast<std::size_t>(o)];
            for (int y = 0; y < d.h; ++y) {
                T* __restrict out_row = out.row(n, o, y);
                for (int x = 0; x < d.w; ++x) out_row[x] = b;
            }
            for (int i = 0; i < d.c; ++i) {
                for (int dy = 0; dy < kh; ++dy) {
                    const int y0 = std::max(0, ph - dy);
                    const int y1 = std::min(d.h, d.h + ph - dy);
                    const T* __restrict wk = kernel.weights.row(o, i, dy);
                    for (int y = y0; y < y1; ++y) {
                        const T* __restrict in_row = input.row(n, i, y + dy - ph);
                        T* __restrict out_row = out.row(n, o, y);
                        for (int x = 0; x < d.w; ++x) {
                            const int dx0 = std::max(0, pw - x);
                            const int dx1 = std::min(kw, d.w + pw - x);
                            T acc = out_row[x];
                            for (int dx = dx0; dx < dx1; ++dx) acc += wk[dx] * in_row[x + dx - pw];
                            out_row[x] = acc;
                        }
                    }
                }
            }
        }
    }
    return out;
}

template <typename T>
struct ConvBackwardResult {
    Tensor<T> grad_input;
    ConvKernel<T> kernel_grad;  // grad_weights in .weights, grad_bias in .bias
};

template <typename T>
ConvBackwardResult<T> conv2d_backward(const Tensor<T>& input, const ConvKernel<T>& kernel,
                                      const Tensor<T>& grad_output) {
    detail::check_forward_args(input, kernel);
    const Dims d = input.dims();
    const Dims expected{d.n, kernel.c_out(), d.h, d.w};
    if (!(grad_output.dims() == expected)) {
        throw std::invalid_argument("conv2d_backward: grad_output dims " + grad_output.dims().str() +
                                    " do not match forward output dims " + expected.str());
    }
    const int kh = kernel.kh(), kw = kernel.kw();
    const int ph = (kh - 1) / 2, pw = (kw - 1) / 2;

    ConvBackwardResult<T> res;
    res.kernel_grad = ConvKernel<T>(kernel.c_out(), kernel.c_in(), kh, kw);

    // grad_bias[o] = sum over (n, y, x) of grad_output.
    for (int o = 0; o < kernel.c_out(); ++o) {
        T acc = T(0);
        for (int n = 0; n < d.n; ++n) {
            for (int y = 0; y < d.h; ++y) {
                const T* go_row = grad_output.row(n, o, y);
                for (int x = 0; x < d.w; ++x) acc += go_row[x];
            }
        }
        res.kernel_grad.bias[static_cast<std::size_t>(o)] = acc;
    }

#ifdef DRPNN_HAVE_VEC8
    if constexpr (std::is_same_v<T, float>) {
        if (detail::fast_f32_applicable(kw)) {
            const detail::PaddedRowsF32 pin(input, pw);
            for (int o = 0; o < kernel.c_out(); ++o) {
                for (int i = 0; i < kernel.c_in(); ++i) {
                    for (int dy = 0; dy < kh; ++dy) {
                        detail::grad_weights_rows_f32(pin, grad_output, o, i, dy, ph, kw,
                                                      res.kernel_grad.weights.row(o, i, dy));
                    }
                }
            }
            const detail::PaddedRowsF32 pgo(grad_output, pw);
            res.grad_input = detail::grad_input_f32(pgo, kernel, d);
            return res;
        }
    }
#endif

    // grad_weights[o,i,dy,dx] = sum over (n, y, x) of go[n,o,y,x] * in[n,i,y+dy-ph,x+dx-pw].
    for (int o = 0; o < kernel.c_out(); ++o) {
        for (int i = 0; i < kernel.c_in(); ++i) {
            for (int dy = 0; dy < kh; ++dy) {
                T* acc_row = res.kernel_grad.weights.row(o, i, dy);
                for (int n = 0; n < d.n; ++n) {
                    for (int y = 0; y < d.h; ++y) {
                        const int iy = y + dy - ph;
                        if (iy < 0 || iy >= d.h) continue;
                        const T* __restrict go_row = grad_output.row(n, o, y);
                        const T* __restrict in_row = input.row(n, i, iy);
                        for (int x = 0; x < d.w; ++x) {
                            const int dx0 = std::max(0, pw - x);
                            const int dx1 = std::min(kw, d.w + pw - x);
                            const T g = go_row[x];
                            for (int dx = dx0; dx < dx1; ++dx) acc_row[dx] += g * in_row[x + dx - pw];
                        }
                    }
                }
            }
        }
    }

    // grad_input[n,i,y,x] = sum over (o, dy, dx) of go[n,o,y-dy+ph,x-dx+pw] * w[o,i,dy,dx]
    // (full correlation with the flipped kernel).
    res.grad_input = Tensor<T>(d);
    for (int n = 0; n < d.n; ++n) {
        for (int i = 0; i < kernel.c_in(); ++i) {
            for (int o = 0; o < kernel.c_out(); ++o) {
                for (int dy = 0; dy < kh; ++dy) {
                    const int y0 = std::max(0, dy - ph);
                    const int y1 = std::min(d.h, d.h + dy - ph);
                    const T* __restrict wk = kernel.weights.row(o, i, dy);
                    for (int y = y0; y < y1; ++y) {
                        const T* __restrict go_row = grad_output.row(n, o, y - dy + ph);
                        T* __restrict gi_row = res.grad_input.row(n, i, y);
                        for (int x = 0; x < d.w; ++x) {
                            const int dx0 = std::max(0, x + pw + 1 - d.w);
                            const int dx1 = std::min(kw, x + pw + 1);
                            T acc = gi_row[x];
                            for (int dx = dx0; dx < dx1; ++dx) acc += wk[dx] * go_row[x - dx + pw];
                            gi_row[x] = acc;
                        }
                    }
                }
            }
        }
    }
    return res;
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
    Tensor<T> out(x.dims());
    const T* __restrict src = x.data();
    T* __restrict dst = out.data();
    const std::int64_t n = x.size();
    for (std::int64_t i = 0; i < n; ++i) dst[i] = src[i] > T(0) ? src[i] : T(0);
    return out;
}

// Subgradient 0 at x == 0: the mask passes grad only where x > 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_output) {
    if (!x.same_dims(grad_output)) {
        throw std::invalid_argument("relu_backward: dims " + x.dims().str() + " vs " +
                                    grad_output.dims().str());
    }
    Tensor<T> out(x.dims());
    const T* __restrict xs = x.data();
    const T* __restrict gs = grad_output.data();
    T* __restrict dst = out.data();
    const std::int64_t n = x.size();
    for (std::int64_t i = 0; i < n; ++i) dst[i] = xs[i] > T(0) ? gs[i] : T(0);
    return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    if (!a.same_dims(b)) {
        throw std::invalid_argument("add: dims " + a.dims().str() + " vs " + b.dims().str());
    }
    Tensor<T> out(a.dims());
    const T* __restrict pa = a.data();
    const T* __restrict pb = b.data();
    T* __restrict dst = out.data();
    const std::int64_t n = a.size();
    for (std::int64_t i = 0; i < n; ++i) dst[i] = pa[i] + pb[i];
    return out;
}

}  // namespace drpnn
