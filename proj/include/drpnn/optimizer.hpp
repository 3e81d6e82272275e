#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "drpnn/network.hpp"
#include "drpnn/tensor.hpp"

namespace drpnn {

// How the squared error is normalized. `mean` divides by the element count
// so learning rates are patch-size-independent; `sum` is the raw squared
// L2 norm, kept for fidelity experiments.
enum class LossNorm { mean, sum };

enum class LayerClass { body, last };

struct TrainConfig {
    int epochs = 300;
    int batch_size = 64;
    double lr_body = 0.05;   // layers 1..L-1
    double lr_last = 0.005;  // layer L
    double momentum = 0.95;
    double decay_factor = 0.5;
    int decay_period = 60;  // epochs between learning-rate decays
    std::uint64_t seed = 0;
    LossNorm loss_norm = LossNorm::mean;

    void validate() const {
        if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
        if (!(lr_body > 0.0) || !(lr_last > 0.0)) throw std::invalid_argument("TrainConfig: learning rates must be > 0");
        if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("TrainConfig: momentum must be in [0, 1)");
        if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw std::invalid_argument("TrainConfig: decay_factor must be in (0, 1]");
        if (decay_period < 1) throw std::invalid_argument("TrainConfig: decay_period must be >= 1");
    }

    bool operator==(const TrainConfig&) const = default;
};

// Velocity tensors mirror the parameter shapes; `step` counts applied updates.
template <typename T>
struct OptimizerState {
    NetworkParams<T> velocity;
    std::int64_t step = 0;

    static OptimizerState zero_like(const NetworkParams<T>& params) {
        OptimizerState st;
        st.velocity.layers.reserve(params.layers.size());
        for (const auto& k : params.layers) {
            st.velocity.layers.emplace_back(k.c_out(), k.c_in(), k.kh(), k.kw());
        }
        return st;
    }
};

using OptimizerStateF = OptimizerState<float>;

template <typename T>
struct LossGrad {
    double loss = 0.0;
    Tensor<T> grad;
};

// Squared-error loss and its gradient with respect to the network output.
// loss = norm(sum((truth - f)^2)), grad = d loss / d f. Accumulation runs in
// double regardless of T.
template <typename T>
LossGrad<T> loss_and_grad(const Tensor<T>& f, const Tensor<T>& truth, LossNorm norm = LossNorm::mean) {
    if (!f.same_dims(truth)) {
        throw std::invalid_argument("loss_and_grad: dims " + f.dims().str() + " vs " + truth.dims().str());
    }
    const std::int64_t count = f.size();
    const double scale = (norm == LossNorm::mean) ? 1.0 / static_cast<double>(count) : 1.0;

    LossGrad<T> out;
    out.grad = Tensor<T>(f.dims());
    const T* pf = f.data();
    const T* pt = truth.data();
    T* pg = out.grad.data();
    double acc = 0.0;
    const T gscale = static_cast<T>(2.0 * scale);
    for (std::int64_t i = 0; i < count; ++i) {
        const double diff = static_cast<double>(pf[i]) - static_cast<double>(pt[i]);
        acc += diff * diff;
        pg[i] = gscale * (pf[i] - pt[i]);
    }
    out.loss = acc * scale;
    return out;
}

// Classic momentum update: v <- mu * v - lr * grad; theta <- theta + v.
// Layers 1..L-1 use lr_body, layer L uses lr_last.
template <typename T>
void momentum_step(NetworkParams<T>& params, OptimizerState<T>& state, const NetworkParams<T>& grads,
                   double lr_body, double lr_last, double mu) {
    if (params.layers.size() != grads.layers.size() ||
        params.layers.size() != state.velocity.layers.size()) {
        throw std::invalid_argument("momentum_step: layer count mismatch");
    }
    const std::size_t n_layers = params.layers.size();
    for (std::size_t l = 0; l < n_layers; ++l) {
        ConvKernel<T>& p = params.layers[l];
        ConvKernel<T>& v = state.velocity.layers[l];
        const ConvKernel<T>& g = grads.layers[l];
        if (!(p.weights.dims() == g.weights.dims()) || !(p.weights.dims() == v.weights.dims())) {
            throw std::invalid_argument("momentum_step: shape mismatch at layer " + std::to_string(l + 1));
        }
        const T lr = static_cast<T>(l + 1 == n_layers ? lr_last : lr_body);
        const T m = static_cast<T>(mu);

        T* pw = p.weights.data();
        T* vw = v.weights.data();
        const T* gw = g.weights.data();
        const std::int64_t wn = p.weights.size();
        for (std::int64_t i = 0; i < wn; ++i) {
            vw[i] = m * vw[i] - lr * gw[i];
            pw[i] += vw[i];
        }
        for (std::size_t i = 0; i < p.bias.size(); ++i) {
            v.bias[i] = m * v.bias[i] - lr * g.bias[i];
            p.bias[i] += v.bias[i];
        }
    }
    state.step += 1;
}

// Learning rate at a given epoch: base * decay_factor^floor(epoch / period).
inline double lr_at_epoch(const TrainConfig& config, int epoch, LayerClass cls) {
    if (epoch < 0 || epoch >= config.epochs) {
        throw std::invalid_argument("lr_at_epoch: epoch " + std::to_string(epoch) + " outside [0, " +
                                    std::to_string(config.epochs) + ")");
    }
    const double base = (cls == LayerClass::body) ? config.lr_body : config.lr_last;
    return base * std::pow(config.decay_factor, static_cast<double>(epoch / config.decay_period));
}

// One training sample: network input G and its ground-truth MS patch.
struct PatchPair {
    TensorF input;
    TensorF truth;
};

struct TrainLogRecord {
    int epoch = 0;
    double mean_loss = 0.0;
    double lr_body = 0.0;
    double wall_seconds = 0.0;  // informational; not part of persisted logs
};

// Invoked after every finished epoch (periodic checkpointing, progress).
using EpochCallback =
    std::function<void(const TrainLogRecord&, const NetworkParamsF&, const OptimizerStateF&)>;

// Runs epochs x batches of {forward, loss, backward, momentum step} over the
// patch set. Sample order reshuffles every epoch from a seed derived from
// (config.seed, epoch), so a resumed run replays the identical stream. The
// last incomplete batch of each epoch is dropped. Throws on non-finite loss.
std::vector<TrainLogRecord> train(NetworkParamsF& params, OptimizerStateF& state,
                                  const NetworkSpec& spec, const TrainConfig& config,
                                  const std::vector<PatchPair>& dataset, int start_epoch = 0,
                                  const EpochCallback& on_epoch = nullptr);

// Resumable snapshot of an interrupted run (params + velocities + position).
void save_train_state(const std::string& path, const NetworkParamsF& params,
                      const OptimizerStateF& state, const NetworkSpec& spec, int next_epoch);
struct TrainState {
    NetworkParamsF params;
    OptimizerStateF state;
    NetworkSpec spec;
    int next_epoch = 0;
};
TrainState load_train_state(const std::string& path);

}  // namespace drpnn
