#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "drpnn/dataset_io.hpp"
#include "drpnn/metrics.hpp"
#include "drpnn/network.hpp"
#include "drpnn/optimizer.hpp"

namespace drpnn {

// Batch-run configuration: network topology, training hyper-parameters,
// dataset paths. Loaded from a JSON file; every omitted field keeps its
// default.
struct RunConfig {
    NetworkSpec network;
    TrainConfig train;
    std::string manifest;
    int patch_size = 32;
    int stride = 32;
    int q_window = 32;
    std::string out_dir = "out";

    static RunConfig from_file(const std::string& path);
    static RunConfig from_json_text(const std::string& text, const std::string& origin = "<config>");
    std::string to_json_text() const;
    void validate() const;

    bool operator==(const RunConfig&) const = default;
};

// Applies the reduced-resolution degradation to every scene of a manifest and
// writes the reduced tensors plus a new manifest (truth paths populated) into
// out_dir. Partial output is removed on failure. Returns the new manifest
// path.
std::string cmd_simulate(const std::string& manifest_path, const std::string& out_dir);

struct TrainOutputs {
    std::string checkpoint_path;
    std::string log_path;
    std::vector<TrainLogRecord> log;
};

// Header written at the top of every training log; echoes the effective
// hyper-parameters.
std::string training_log_header(const RunConfig& config, std::size_t n_patches);

// Extracts patches from the train split, runs the training loop, and writes
// checkpoint + log (plus a resumable snapshot every decay_period epochs).
// `resume_path` continues an interrupted run from a periodic snapshot.
// `progress` (optional) receives per-epoch lines including wall time.
TrainOutputs cmd_train(const RunConfig& config, const std::string& resume_path = "",
                       std::ostream* progress = nullptr);

struct FuseOptions {
    std::string truecolor_path;              // empty: no image export
    std::array<int, 3> truecolor_bands = {2, 1, 0};
};

// Loads a checkpoint, builds the network input from an MS/PAN pair, runs the
// forward pass, and writes the fused tensor (optionally a true-color PNG).
TensorF cmd_fuse(const std::string& checkpoint_path, const std::string& ms_path,
                 const std::string& pan_path, int scale, const std::string& out_path,
                 const FuseOptions& options = {});

// Computes the metric suite between two tensor files and writes the
// key-value report when out_path is non-empty.
MetricsReport cmd_evaluate(const std::string& fused_path, const std::string& reference_path,
                           int scale, int window, const std::string& out_path);

struct SweepRow {
    int size = 0;
    double q = 0.0;
    double sam = 0.0;
};

// Trains one model per filter size on the train split, evaluates mean Q and
// SAM on the test split, and writes a (size, Q, SAM) table.
std::vector<SweepRow> cmd_sweep_filters(const RunConfig& config, const std::vector<int>& sizes,
                                        const std::string& out_path, std::ostream* progress = nullptr);

}  // namespace drpnn
