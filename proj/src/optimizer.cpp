#include "drpnn/optimizer.hpp"

#include <chrono>
#include <fstream>
#include <numeric>

#include "drpnn/detail/binio.hpp"
#include "drpnn/rng.hpp"

namespace drpnn {

namespace detail {
void write_spec(std::ostream& os, const NetworkSpec& spec);
NetworkSpec read_spec(std::istream& is, const std::string& path);
void write_params(std::ostream& os, const NetworkParamsF& params);
NetworkParamsF read_params(std::istream& is, const NetworkSpec& spec, const std::string& path);
}  // namespace detail

namespace {

void check_dataset(const NetworkSpec& spec, const TrainConfig& config,
                   const std::vector<PatchPair>& dataset) {
    if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");
    if (static_cast<int>(dataset.size()) < config.batch_size) {
        throw std::invalid_argument("train: batch size " + std::to_string(config.batch_size) +
                                    " exceeds dataset size " + std::to_string(dataset.size()));
    }
    const Dims in0 = dataset.front().input.dims();
    const Dims tr0 = dataset.front().truth.dims();
    if (in0.n != 1 || tr0.n != 1 || in0.c != spec.bands + 1 || tr0.c != spec.bands ||
        in0.h != tr0.h || in0.w != tr0.w) {
        throw std::invalid_argument("train: patch shapes " + in0.str() + " / " + tr0.str() +
                                    " inconsistent with spec (S = " + std::to_string(spec.bands) + ")");
    }
    for (const auto& p : dataset) {
        if (!(p.input.dims() == in0) || !(p.truth.dims() == tr0)) {
            throw std::invalid_argument("train: dataset patches have mixed shapes");
        }
    }
}

}  // namespace

std::vector<TrainLogRecord> train(NetworkParamsF& params, OptimizerStateF& state,
                                  const NetworkSpec& spec, const TrainConfig& config,
                                  const std::vector<PatchPair>& dataset, int start_epoch,
                                  const EpochCallback& on_epoch) {
    spec.validate();
    config.validate();
    params.validate_against(spec);
    state.velocity.validate_against(spec);
    check_dataset(spec, config, dataset);
    if (start_epoch < 0 || start_epoch > config.epochs) {
        throw std::invalid_argument("train: start epoch out of range");
    }

    const Dims in0 = dataset.front().input.dims();
    const Dims tr0 = dataset.front().truth.dims();
    const int batches = static_cast<int>(dataset.size()) / config.batch_size;
    const std::int64_t in_patch = in0.count();
    const std::int64_t tr_patch = tr0.count();

    Tensor<float> batch_in(Dims{config.batch_size, in0.c, in0.h, in0.w});
    Tensor<float> batch_tr(Dims{config.batch_size, tr0.c, tr0.h, tr0.w});
    std::vector<std::size_t> order(dataset.size());

    const auto t0 = std::chrono::steady_clock::now();
    std::vector<TrainLogRecord> log;
    log.reserve(static_cast<std::size_t>(config.epochs - start_epoch));

    for (int epoch = start_epoch; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order);

        const double lr_body = lr_at_epoch(config, epoch, LayerClass::body);
        const double lr_last = lr_at_epoch(config, epoch, LayerClass::last);

        double loss_sum = 0.0;
        for (int b = 0; b < batches; ++b) {
            for (int s = 0; s < config.batch_size; ++s) {
                const PatchPair& p = dataset[order[static_cast<std::size_t>(b) * config.batch_size + s]];
                std::copy(p.input.data(), p.input.data() + in_patch, batch_in.data() + s * in_patch);
                std::copy(p.truth.data(), p.truth.data() + tr_patch, batch_tr.data() + s * tr_patch);
            }
            ForwardCache<float> cache;
            Tensor<float> f = forward(params, spec, batch_in, &cache);
            LossGrad<float> lg = loss_and_grad(f, batch_tr, config.loss_norm);
            if (!std::isfinite(lg.loss)) {
                throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", batch " + std::to_string(b) +
                                         " (lr_body = " + std::to_string(lr_body) + ")");
            }
            NetworkParamsF grads = backward(params, spec, cache, lg.grad);
            momentum_step(params, state, grads, lr_body, lr_last, config.momentum);
            loss_sum += lg.loss;
        }

        TrainLogRecord rec;
        rec.epoch = epoch;
        rec.mean_loss = loss_sum / batches;
        rec.lr_body = lr_body;
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log.push_back(rec);
        if (on_epoch) on_epoch(rec, params, state);
    }
    return log;
}

namespace {
constexpr char kStateMagic[4] = {'D', 'R', 'P', 'S'};
constexpr std::uint32_t kStateVersion = 1;
}  // namespace

void save_train_state(const std::string& path, const NetworkParamsF& params,
                      const OptimizerStateF& state, const NetworkSpec& spec, int next_epoch) {
    params.validate_against(spec);
    state.velocity.validate_against(spec);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open train state for writing: " + path);
    os.write(kStateMagic, 4);
    detail::write_u32(os, kStateVersion);
    detail::write_u32(os, static_cast<std::uint32_t>(next_epoch));
    detail::write_u64(os, static_cast<std::uint64_t>(state.step));
    detail::write_spec(os, spec);
    detail::write_params(os, params);
    detail::write_params(os, state.velocity);
    if (!os) throw std::runtime_error("write failure on train state: " + path);
}

TrainState load_train_state(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open train state: " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::string(magic, 4) != std::string(kStateMagic, 4)) {
        throw std::runtime_error(path + ": not a train-state file (bad magic)");
    }
    const std::uint32_t version = detail::read_u32(is, path + ": version");
    if (version != kStateVersion) {
        throw std::runtime_error(path + ": unsupported train-state version " + std::to_string(version));
    }
    TrainState ts;
    ts.next_epoch = static_cast<int>(detail::read_u32(is, path + ": epoch"));
    ts.state.step = static_cast<std::int64_t>(detail::read_u64(is, path + ": step"));
    ts.spec = detail::read_spec(is, path);
    ts.params = detail::read_params(is, ts.spec, path);
    ts.state.velocity = detail::read_params(is, ts.spec, path);
    is.peek();
    if (!is.eof()) throw std::runtime_error(path + ": trailing bytes after state data");
    return ts;
}

}  // namespace drpnn
