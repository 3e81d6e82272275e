#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "drpnn/optimizer.hpp"
#include "support/oracles.hpp"

using namespace drpnn;

namespace {

// A small overfittable problem: one patch pair whose truth is a fixed linear
// mix of the input channels, so a few layers can memorize it quickly.
PatchPair toy_patch(int bands, int size, std::uint64_t seed) {
    Rng rng(seed);
    PatchPair p;
    p.input = oracle::random_tensor<float>(rng, Dims{1, bands + 1, size, size}, 0.0, 1.0);
    p.truth = TensorF(Dims{1, bands, size, size});
    for (int c = 0; c < bands; ++c) {
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                const float a = p.input(0, c, y, x);
                const float pan = p.input(0, bands, y, x);
                p.truth(0, c, y, x) = 0.7f * a + 0.3f * pan;
            }
        }
    }
    return p;
}

NetworkSpec toy_spec(int bands) {
    NetworkSpec spec;
    spec.layers = 3;
    spec.bands = bands;
    spec.hidden_channels = 8;
    spec.filter_h = spec.filter_w = 3;
    return spec;
}

}  // namespace

TEST_CASE("loss_and_grad: identical tensors give zero") {
    Rng rng(1);
    TensorF f = oracle::random_tensor<float>(rng, Dims{2, 3, 4, 4});
    auto lg = loss_and_grad(f, f);
    CHECK(lg.loss == 0.0);
    CHECK(oracle::max_abs(lg.grad) == 0.0);
}

TEST_CASE("loss_and_grad: scalar case") {
    TensorF f(Dims{1, 1, 1, 1}, 3.0f);
    TensorF t(Dims{1, 1, 1, 1}, 1.0f);
    auto lg = loss_and_grad(f, t);
    CHECK(lg.loss == doctest::Approx(4.0));
    CHECK(lg.grad(0, 0, 0, 0) == doctest::Approx(4.0));

    auto lg_sum = loss_and_grad(f, t, LossNorm::sum);
    CHECK(lg_sum.loss == doctest::Approx(4.0));

    CHECK_THROWS_AS(loss_and_grad(f, TensorF(Dims{1, 1, 1, 2})), std::invalid_argument);
}

TEST_CASE("loss_and_grad gradient matches finite differences") {
    Rng rng(2);
    TensorD f = oracle::random_tensor<double>(rng, Dims{1, 2, 3, 4});
    TensorD t = oracle::random_tensor<double>(rng, Dims{1, 2, 3, 4});
    for (LossNorm norm : {LossNorm::mean, LossNorm::sum}) {
        auto lg = loss_and_grad(f, t, norm);
        CHECK(lg.loss >= 0.0);
        const double h = 1e-6;
        for (std::int64_t i = 0; i < f.size(); ++i) {
            TensorD fp = f, fm = f;
            fp.data()[i] += h;
            fm.data()[i] -= h;
            const double fd =
                (loss_and_grad(fp, t, norm).loss - loss_and_grad(fm, t, norm).loss) / (2 * h);
            CHECK(oracle::rel_err(lg.grad.data()[i], fd, 1e-8) < 1e-8);
        }
    }
}

TEST_CASE("momentum_step with mu = 0 is plain gradient descent bit for bit") {
    NetworkSpec spec = toy_spec(2);
    NetworkParamsF params = init_network(spec, 5);
    NetworkParamsF expected = params;
    OptimizerStateF state = OptimizerStateF::zero_like(params);

    NetworkParamsF grads = init_network(spec, 6);  // arbitrary kernel-shaped values
    momentum_step(params, state, grads, 0.05, 0.005, 0.0);

    for (std::size_t l = 0; l < expected.layers.size(); ++l) {
        const float lr = (l + 1 == expected.layers.size()) ? 0.005f : 0.05f;
        for (std::int64_t i = 0; i < expected.layers[l].weights.size(); ++i) {
            const float step = lr * grads.layers[l].weights.data()[i];
            expected.layers[l].weights.data()[i] -= step;
        }
    }
    CHECK(params == expected);
    CHECK(state.step == 1);
}

TEST_CASE("momentum velocity decays geometrically once gradients stop") {
    NetworkSpec spec;
    spec.layers = 2;
    spec.bands = 1;
    spec.filter_h = spec.filter_w = 1;
    NetworkParams<double> params = init_network(spec, 1).cast<double>();
    OptimizerState<double> state = OptimizerState<double>::zero_like(params);

    // Warm start: one step with constant gradient g plants velocity -lr*g.
    NetworkParams<double> grads = params;
    for (auto& k : grads.layers) {
        k.weights.fill(2.0);
        for (auto& b : k.bias) b = 2.0;
    }
    const double lr = 0.1, mu = 0.9;
    momentum_step(params, state, grads, lr, lr, mu);
    const double v0 = -lr * 2.0;
    CHECK(state.velocity.layers[0].weights(0, 0, 0, 0) == doctest::Approx(v0));

    // Zero gradients afterwards: the step-k drift is v0 * mu^k.
    NetworkParams<double> zero = grads;
    for (auto& k : zero.layers) {
        k.weights.fill(0.0);
        for (auto& b : k.bias) b = 0.0;
    }
    double prev = params.layers[0].weights(0, 0, 0, 0);
    for (int k = 1; k <= 5; ++k) {
        momentum_step(params, state, zero, lr, lr, mu);
        const double now = params.layers[0].weights(0, 0, 0, 0);
        CHECK(oracle::rel_err(now - prev, v0 * std::pow(mu, k), 1e-15) < 1e-12);
        prev = now;
    }
}

TEST_CASE("momentum two-step recurrence with constant gradient") {
    NetworkSpec spec;
    spec.layers = 2;
    spec.bands = 1;
    spec.filter_h = spec.filter_w = 1;
    NetworkParams<double> params = init_network(spec, 2).cast<double>();
    const double start = params.layers[0].weights(0, 0, 0, 0);
    OptimizerState<double> state = OptimizerState<double>::zero_like(params);

    NetworkParams<double> grads = params;
    for (auto& k : grads.layers) {
        k.weights.fill(1.0);
        for (auto& b : k.bias) b = 1.0;
    }
    const double eps = 0.05, mu = 0.95;
    momentum_step(params, state, grads, eps, eps, mu);
    CHECK(state.velocity.layers[0].weights(0, 0, 0, 0) == doctest::Approx(-eps));
    momentum_step(params, state, grads, eps, eps, mu);
    CHECK(state.velocity.layers[0].weights(0, 0, 0, 0) == doctest::Approx(-eps * (1.0 + mu)));
    const double drift = params.layers[0].weights(0, 0, 0, 0) - start;
    CHECK(drift == doctest::Approx(-eps * (1.0 + (1.0 + mu))));

    NetworkParams<double> wrong = grads;
    wrong.layers[0] = ConvKernel<double>(2, 2, 3, 3);
    CHECK_THROWS_AS(momentum_step(params, state, wrong, eps, eps, mu), std::invalid_argument);
}

TEST_CASE("lr_at_epoch follows the halving schedule exactly") {
    TrainConfig cfg;  // defaults: 0.05 / 0.005, factor 0.5, period 60, 300 epochs
    CHECK(lr_at_epoch(cfg, 0, LayerClass::body) == 0.05);
    CHECK(lr_at_epoch(cfg, 59, LayerClass::body) == 0.05);
    CHECK(lr_at_epoch(cfg, 60, LayerClass::body) == 0.025);
    CHECK(lr_at_epoch(cfg, 120, LayerClass::body) == 0.0125);
    CHECK(lr_at_epoch(cfg, 180, LayerClass::body) == 0.00625);
    CHECK(lr_at_epoch(cfg, 240, LayerClass::body) == 0.003125);
    CHECK(lr_at_epoch(cfg, 299, LayerClass::last) == 3.125e-4);
    CHECK_THROWS_AS(lr_at_epoch(cfg, -1, LayerClass::body), std::invalid_argument);
    CHECK_THROWS_AS(lr_at_epoch(cfg, 300, LayerClass::body), std::invalid_argument);

    // Non-increasing and piecewise constant with the decay period.
    double prev = lr_at_epoch(cfg, 0, LayerClass::body);
    for (int e = 1; e < cfg.epochs; ++e) {
        const double now = lr_at_epoch(cfg, e, LayerClass::body);
        CHECK(now <= prev);
        if (e % cfg.decay_period != 0) CHECK(now == prev);
        prev = now;
    }
}

TEST_CASE("train overfits a single patch") {
    NetworkSpec spec = toy_spec(2);
    std::vector<PatchPair> data{toy_patch(2, 32, 42)};

    TrainConfig cfg;
    cfg.epochs = 500;
    cfg.batch_size = 1;
    cfg.lr_body = 0.05;
    cfg.lr_last = 0.02;
    cfg.momentum = 0.95;
    cfg.decay_factor = 0.5;
    cfg.decay_period = 125;
    cfg.seed = 5;

    NetworkParamsF params = init_network(spec, cfg.seed);
    OptimizerStateF state = OptimizerStateF::zero_like(params);
    auto log = train(params, state, spec, cfg, data);
    REQUIRE(log.size() == 500);
    CHECK(log.back().mean_loss < 1e-4 * log.front().mean_loss);

    // With one sample there is no SGD noise: the epoch losses must fall
    // monotonically (5% uptick headroom) after the first epochs, and strictly
    // across every decay window.
    for (std::size_t e = 10; e < log.size(); ++e) {
        CHECK(log[e].mean_loss <= log[e - 1].mean_loss * 1.05);
    }
    for (int w = 0; (w + 1) * cfg.decay_period <= cfg.epochs; ++w) {
        const auto first = static_cast<std::size_t>(w * cfg.decay_period);
        const auto last = static_cast<std::size_t>((w + 1) * cfg.decay_period - 1);
        CHECK(log[last].mean_loss < log[first].mean_loss);
    }
}

TEST_CASE("train is reproducible for a fixed seed") {
    NetworkSpec spec = toy_spec(2);
    std::vector<PatchPair> data;
    for (int i = 0; i < 6; ++i) data.push_back(toy_patch(2, 10, 100 + i));

    TrainConfig cfg;
    cfg.epochs = 8;
    cfg.batch_size = 2;
    cfg.seed = 77;

    NetworkParamsF pa = init_network(spec, cfg.seed);
    OptimizerStateF sa = OptimizerStateF::zero_like(pa);
    auto la = train(pa, sa, spec, cfg, data);

    NetworkParamsF pb = init_network(spec, cfg.seed);
    OptimizerStateF sb = OptimizerStateF::zero_like(pb);
    auto lb = train(pb, sb, spec, cfg, data);

    REQUIRE(la.size() == lb.size());
    for (std::size_t i = 0; i < la.size(); ++i) {
        CHECK(la[i].mean_loss == lb[i].mean_loss);
        CHECK(la[i].lr_body == lb[i].lr_body);
    }
    CHECK(pa == pb);

    NetworkParamsF pc = init_network(spec, cfg.seed);
    OptimizerStateF sc = OptimizerStateF::zero_like(pc);
    TrainConfig other = cfg;
    other.seed = 78;
    auto lc = train(pc, sc, spec, other, data);
    bool all_equal = true;
    for (std::size_t i = 0; i < la.size(); ++i) all_equal &= la[i].mean_loss == lc[i].mean_loss;
    CHECK_FALSE(all_equal);
}

TEST_CASE("train divergence guard names epoch and batch") {
    NetworkSpec spec = toy_spec(2);
    std::vector<PatchPair> data{toy_patch(2, 12, 1)};
    TrainConfig cfg;
    cfg.epochs = 200;
    cfg.batch_size = 1;
    cfg.lr_body = 10.0;  // deliberate blow-up
    cfg.lr_last = 10.0;
    cfg.seed = 3;
    NetworkParamsF params = init_network(spec, cfg.seed);
    OptimizerStateF state = OptimizerStateF::zero_like(params);
    CHECK_THROWS_WITH_AS(train(params, state, spec, cfg, data), doctest::Contains("epoch"),
                         std::runtime_error);
}

TEST_CASE("train validates batch size against the dataset") {
    NetworkSpec spec = toy_spec(2);
    std::vector<PatchPair> data{toy_patch(2, 10, 1)};
    TrainConfig cfg;
    cfg.batch_size = 2;
    NetworkParamsF params = init_network(spec, 0);
    OptimizerStateF state = OptimizerStateF::zero_like(params);
    CHECK_THROWS_AS(train(params, state, spec, cfg, data), std::invalid_argument);
}

TEST_CASE("train state snapshot round trip") {
    NetworkSpec spec = toy_spec(2);
    std::vector<PatchPair> data{toy_patch(2, 10, 5)};
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.batch_size = 1;
    cfg.seed = 11;
    NetworkParamsF params = init_network(spec, cfg.seed);
    OptimizerStateF state = OptimizerStateF::zero_like(params);
    train(params, state, spec, cfg, data);

    const std::string path = "/tmp/drpnn_test_optimizer_state.bin";
    save_train_state(path, params, state, spec, 4);
    TrainState ts = load_train_state(path);
    CHECK(ts.params == params);
    CHECK(ts.state.velocity == state.velocity);
    CHECK(ts.state.step == state.step);
    CHECK(ts.spec == spec);
    CHECK(ts.next_epoch == 4);
}
