#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace drpnn {

// Shape of a rank-4 tensor: batch, channels, rows, cols.
struct Dims {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;

    bool operator==(const Dims&) const = default;

    std::int64_t count() const {
        return static_cast<std::int64_t>(n) * c * static_cast<std::int64_t>(h) * w;
    }

    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
               std::to_string(h) + "," + std::to_string(w) + ")";
    }
};

// Dense rank-4 array, row-major with w fastest. Carries images (n,c,h,w),
// network activations, and (reinterpreted) convolution weight stacks.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Dims dims, T value = T(0)) : dims_(dims) {
        if (dims.n < 1 || dims.c < 1 || dims.h < 1 || dims.w < 1) {
            throw std::invalid_argument("Tensor: dims must be positive, got " + dims.str());
        }
        if (dims.count() > (std::int64_t(1) << 31)) {
            throw std::invalid_argument("Tensor: element count overflows, dims " + dims.str());
        }
        data_.assign(static_cast<std::size_t>(dims.count()), value);
    }

    static Tensor zeros(Dims dims) { return Tensor(dims); }

    const Dims& dims() const { return dims_; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator()(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
    T operator()(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }

    // Pointer to the contiguous row (n, c, y, 0..w).
    T* row(int n, int c, int y) {
        return data_.data() + static_cast<std::size_t>(((static_cast<std::int64_t>(n) * dims_.c + c) * dims_.h + y)) * dims_.w;
    }
    const T* row(int n, int c, int y) const {
        return data_.data() + static_cast<std::size_t>(((static_cast<std::int64_t>(n) * dims_.c + c) * dims_.h + y)) * dims_.w;
    }

    bool same_dims(const Tensor& other) const { return dims_ == other.dims_; }

    void fill(T value) { data_.assign(data_.size(), value); }

    bool is_finite() const {
        for (T v : data_) {
            if (!std::isfinite(static_cast<double>(v))) return false;
        }
        return true;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(dims_);
        for (std::size_t i = 0; i < data_.size(); ++i) out.data()[i] = static_cast<U>(data_[i]);
        return out;
    }

    bool operator==(const Tensor& other) const {
        return dims_ == other.dims_ && data_ == other.data_;
    }

private:
    std::size_t index(int n, int c, int y, int x) const {
        return static_cast<std::size_t>(((static_cast<std::int64_t>(n) * dims_.c + c) * dims_.h + y) * dims_.w + x);
    }

    Dims dims_{};
    std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

// Convolution filter bank: weights (c_out, c_in, kh, kw) plus one bias per
// output channel. Kernel sides must be odd so "same" zero padding is centered.
template <typename T>
struct ConvKernel {
    Tensor<T> weights;    // dims (n=c_out, c=c_in, h=kh, w=kw)
    std::vector<T> bias;  // c_out entries

    ConvKernel() = default;

    ConvKernel(int c_out, int c_in, int kh, int kw)
        : weights(Dims{c_out, c_in, kh, kw}), bias(static_cast<std::size_t>(c_out), T(0)) {
        validate();
    }

    int c_out() const { return weights.dims().n; }
    int c_in() const { return weights.dims().c; }
    int kh() const { return weights.dims().h; }
    int kw() const { return weights.dims().w; }

    void validate() const {
        if (kh() % 2 == 0 || kw() % 2 == 0) {
            throw std::invalid_argument("ConvKernel: kernel sides must be odd, got " +
                                        std::to_string(kh()) + "x" + std::to_string(kw()));
        }
        if (bias.size() != static_cast<std::size_t>(c_out())) {
            throw std::invalid_argument("ConvKernel: bias length " + std::to_string(bias.size()) +
                                        " does not match c_out " + std::to_string(c_out()));
        }
    }

    std::int64_t parameter_count() const { return weights.size() + static_cast<std::int64_t>(bias.size()); }

    template <typename U>
    ConvKernel<U> cast() const {
        ConvKernel<U> out;
        out.weights = weights.template cast<U>();
        out.bias.resize(bias.size());
        for (std::size_t i = 0; i < bias.size(); ++i) out.bias[i] = static_cast<U>(bias[i]);
        return out;
    }

    bool operator==(const ConvKernel& other) const {
        return weights == other.weights && bias == other.bias;
    }
};

using ConvKernelF = ConvKernel<float>;
using ConvKernelD = ConvKernel<double>;

}  // namespace drpnn
