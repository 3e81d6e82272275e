#include "drpnn/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "drpnn/resample.hpp"
#include "drpnn/rng.hpp"

namespace drpnn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown_keys(const json& j, std::initializer_list<const char*> known,
                         const std::string& section, const std::string& origin) {
    for (const auto& [key, value] : j.items()) {
        if (std::find_if(known.begin(), known.end(),
                         [&](const char* k) { return key == k; }) == known.end()) {
            throw std::runtime_error(origin + ": unknown key \"" + key + "\" in " + section);
        }
    }
}

std::string filter_string(const NetworkSpec& spec) {
    if (spec.per_layer_filters.empty()) {
        return std::to_string(spec.filter_h) + "x" + std::to_string(spec.filter_w);
    }
    std::string s;
    for (std::size_t i = 0; i < spec.per_layer_filters.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(spec.per_layer_filters[i][0]) + "x" +
             std::to_string(spec.per_layer_filters[i][1]);
    }
    return s;
}

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::string fmt_e(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9e", v);
    return buf;
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text, const std::string& origin) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw std::runtime_error(origin + ": invalid JSON: " + e.what());
    }
    reject_unknown_keys(doc, {"network", "train", "data", "output", "metrics"}, "config root", origin);

    RunConfig cfg;
    if (doc.contains("network")) {
        const json& n = doc["network"];
        reject_unknown_keys(n, {"layers", "bands", "hidden_channels", "filter_size", "relu_before_skip"},
                            "network", origin);
        cfg.network.layers = n.value("layers", cfg.network.layers);
        cfg.network.bands = n.value("bands", cfg.network.bands);
        cfg.network.hidden_channels = n.value("hidden_channels", cfg.network.hidden_channels);
        cfg.network.relu_before_skip = n.value("relu_before_skip", cfg.network.relu_before_skip);
        if (n.contains("filter_size")) {
            const json& f = n["filter_size"];
            if (f.is_number_integer()) {
                cfg.network.filter_h = cfg.network.filter_w = f.get<int>();
            } else if (f.is_array()) {
                cfg.network.per_layer_filters.clear();
                for (const auto& v : f) {
                    const int k = v.get<int>();
                    cfg.network.per_layer_filters.push_back({k, k});
                }
            } else {
                throw std::runtime_error(origin + ": filter_size must be an integer or an array");
            }
        }
    }
    if (doc.contains("train")) {
        const json& t = doc["train"];
        reject_unknown_keys(t,
                            {"epochs", "batch_size", "lr_body", "lr_last", "momentum", "decay_factor",
                             "decay_period", "seed", "loss"},
                            "train", origin);
        cfg.train.epochs = t.value("epochs", cfg.train.epochs);
        cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
        cfg.train.lr_body = t.value("lr_body", cfg.train.lr_body);
        cfg.train.lr_last = t.value("lr_last", cfg.train.lr_last);
        cfg.train.momentum = t.value("momentum", cfg.train.momentum);
        cfg.train.decay_factor = t.value("decay_factor", cfg.train.decay_factor);
        cfg.train.decay_period = t.value("decay_period", cfg.train.decay_period);
        cfg.train.seed = t.value("seed", cfg.train.seed);
        const std::string loss = t.value("loss", std::string{"mean"});
        if (loss == "mean") {
            cfg.train.loss_norm = LossNorm::mean;
        } else if (loss == "sum") {
            cfg.train.loss_norm = LossNorm::sum;
        } else {
            throw std::runtime_error(origin + ": loss must be \"mean\" or \"sum\"");
        }
    }
    if (doc.contains("data")) {
        const json& d = doc["data"];
        reject_unknown_keys(d, {"manifest", "patch_size", "stride"}, "data", origin);
        cfg.manifest = d.value("manifest", cfg.manifest);
        cfg.patch_size = d.value("patch_size", cfg.patch_size);
        cfg.stride = d.value("stride", cfg.stride);
    }
    if (doc.contains("metrics")) {
        const json& m = doc["metrics"];
        reject_unknown_keys(m, {"q_window"}, "metrics", origin);
        cfg.q_window = m.value("q_window", cfg.q_window);
    }
    if (doc.contains("output")) {
        const json& o = doc["output"];
        reject_unknown_keys(o, {"dir"}, "output", origin);
        cfg.out_dir = o.value("dir", cfg.out_dir);
    }
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config: " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return from_json_text(ss.str(), path);
}

std::string RunConfig::to_json_text() const {
    json doc;
    doc["network"]["layers"] = network.layers;
    doc["network"]["bands"] = network.bands;
    doc["network"]["hidden_channels"] = network.hidden_channels;
    if (network.per_layer_filters.empty()) {
        doc["network"]["filter_size"] = network.filter_h;
    } else {
        json arr = json::array();
        for (const auto& f : network.per_layer_filters) arr.push_back(f[0]);
        doc["network"]["filter_size"] = std::move(arr);
    }
    doc["network"]["relu_before_skip"] = network.relu_before_skip;
    doc["train"]["epochs"] = train.epochs;
    doc["train"]["batch_size"] = train.batch_size;
    doc["train"]["lr_body"] = train.lr_body;
    doc["train"]["lr_last"] = train.lr_last;
    doc["train"]["momentum"] = train.momentum;
    doc["train"]["decay_factor"] = train.decay_factor;
    doc["train"]["decay_period"] = train.decay_period;
    doc["train"]["seed"] = train.seed;
    doc["train"]["loss"] = train.loss_norm == LossNorm::mean ? "mean" : "sum";
    doc["data"]["manifest"] = manifest;
    doc["data"]["patch_size"] = patch_size;
    doc["data"]["stride"] = stride;
    doc["metrics"]["q_window"] = q_window;
    doc["output"]["dir"] = out_dir;
    return doc.dump(2) + "\n";
}

void RunConfig::validate() const {
    network.validate();
    train.validate();
    if (patch_size < 1) throw std::invalid_argument("RunConfig: patch_size must be >= 1");
    if (stride < 1) throw std::invalid_argument("RunConfig: stride must be >= 1");
    if (q_window < 2) throw std::invalid_argument("RunConfig: q_window must be >= 2");
}

std::string cmd_simulate(const std::string& manifest_path, const std::string& out_dir) {
    const std::vector<ManifestScene> scenes = load_scenes(manifest_path);
    if (scenes.empty()) throw std::runtime_error(manifest_path + ": manifest lists no scenes");

    // Degrade everything in memory first so a failing scene leaves no files.
    std::vector<ScenePair> reduced;
    reduced.reserve(scenes.size());
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        try {
            reduced.push_back(wald_simulate(scenes[i].scene));
        } catch (const std::exception& e) {
            throw std::runtime_error("scene " + std::to_string(i) + " (" + scenes[i].record.ms_path +
                                     "): " + e.what());
        }
    }

    fs::create_directories(out_dir);
    std::vector<std::string> written;
    const auto cleanup = [&written]() {
        for (const auto& p : written) {
            std::error_code ec;
            fs::remove(p, ec);
        }
    };
    try {
        std::vector<SceneRecord> records;
        for (std::size_t i = 0; i < scenes.size(); ++i) {
            char stem[32];
            std::snprintf(stem, sizeof(stem), "scene%04zu", i);
            SceneRecord rec;
            rec.ms_path = std::string(stem) + "_ms.pft";
            rec.pan_path = std::string(stem) + "_pan.pft";
            rec.truth_path = std::string(stem) + "_truth.pft";
            rec.scale = reduced[i].scale;
            rec.bands = reduced[i].ms.dims().c;
            rec.split = scenes[i].split;
            const fs::path base(out_dir);
            written.push_back((base / rec.ms_path).string());
            write_tensor(written.back(), reduced[i].ms);
            written.push_back((base / rec.pan_path).string());
            write_tensor(written.back(), reduced[i].pan);
            written.push_back((base / rec.truth_path).string());
            write_tensor(written.back(), *reduced[i].truth);
            records.push_back(std::move(rec));
        }
        const std::string out_manifest = (fs::path(out_dir) / "manifest.json").string();
        written.push_back(out_manifest);
        write_manifest(out_manifest, records);
        return out_manifest;
    } catch (...) {
        cleanup();
        throw;
    }
}

namespace {

// Patches from every truth-carrying scene of the requested split.
std::vector<PatchPair> collect_patches(const RunConfig& config,
                                       const std::vector<ManifestScene>& scenes,
                                       const std::string& split) {
    std::vector<PatchPair> patches;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        if (scenes[i].split != split) continue;
        if (!scenes[i].scene.truth) {
            throw std::runtime_error("scene " + std::to_string(i) + " (" + scenes[i].record.ms_path +
                                     ") has no ground truth; run simulate first");
        }
        if (scenes[i].scene.ms.dims().c != config.network.bands) {
            throw std::runtime_error("scene " + std::to_string(i) + " has " +
                                     std::to_string(scenes[i].scene.ms.dims().c) +
                                     " bands but the network is configured for " +
                                     std::to_string(config.network.bands));
        }
        std::vector<PatchPair> p = extract_patches(scenes[i].scene, config.patch_size, config.stride,
                                                   mix_seed(config.train.seed, i));
        std::move(p.begin(), p.end(), std::back_inserter(patches));
    }
    if (patches.empty()) {
        throw std::runtime_error("no \"" + split + "\" patches found in " + config.manifest);
    }
    return patches;
}

}  // namespace

std::string training_log_header(const RunConfig& config, std::size_t n_patches) {
    const NetworkSpec& n = config.network;
    const TrainConfig& t = config.train;
    std::string s;
    s += "# drpnn training log\n";
    s += "# layers=" + std::to_string(n.layers) + " filter=" + filter_string(n) +
         " hidden_channels=" + std::to_string(n.hidden_channels) +
         " bands=" + std::to_string(n.bands) +
         " relu_before_skip=" + std::string(n.relu_before_skip ? "1" : "0") + "\n";
    s += "# epochs=" + std::to_string(t.epochs) + " batch_size=" + std::to_string(t.batch_size) +
         " lr_body=" + fmt_g(t.lr_body) + " lr_last=" + fmt_g(t.lr_last) +
         " momentum=" + fmt_g(t.momentum) + " decay_factor=" + fmt_g(t.decay_factor) +
         " decay_period=" + std::to_string(t.decay_period) + " seed=" + std::to_string(t.seed) +
         " loss=" + (t.loss_norm == LossNorm::mean ? "mean" : "sum") + "\n";
    s += "# patch_size=" + std::to_string(config.patch_size) + " stride=" +
         std::to_string(config.stride) + " patches=" + std::to_string(n_patches) + "\n";
    s += "# columns: epoch mean_loss lr_body\n";
    return s;
}

TrainOutputs cmd_train(const RunConfig& config, const std::string& resume_path,
                       std::ostream* progress) {
    config.validate();
    if (config.manifest.empty()) throw std::runtime_error("config has no data.manifest");
    const std::vector<ManifestScene> scenes = load_scenes(config.manifest);
    const std::vector<PatchPair> patches = collect_patches(config, scenes, "train");

    NetworkParamsF params;
    OptimizerStateF state;
    int start_epoch = 0;
    if (resume_path.empty()) {
        params = init_network(config.network, config.train.seed);
        state = OptimizerStateF::zero_like(params);
    } else {
        TrainState ts = load_train_state(resume_path);
        if (!(ts.spec == config.network)) {
            throw std::runtime_error(resume_path + ": snapshot topology differs from config");
        }
        params = std::move(ts.params);
        state = std::move(ts.state);
        start_epoch = ts.next_epoch;
        if (start_epoch >= config.train.epochs) {
            throw std::runtime_error(resume_path + ": snapshot is already past the configured epochs");
        }
    }

    fs::create_directories(config.out_dir);
    const fs::path base(config.out_dir);

    const EpochCallback on_epoch = [&](const TrainLogRecord& rec, const NetworkParamsF& p,
                                       const OptimizerStateF& st) {
        if (progress) {
            (*progress) << "epoch " << rec.epoch << " loss " << fmt_e(rec.mean_loss) << " lr "
                        << fmt_g(rec.lr_body) << " (" << fmt_g(rec.wall_seconds) << " s)\n";
        }
        if ((rec.epoch + 1) % config.train.decay_period == 0 &&
            rec.epoch + 1 < config.train.epochs) {
            char name[48];
            std::snprintf(name, sizeof(name), "state_epoch%04d.bin", rec.epoch + 1);
            save_train_state((base / name).string(), p, st, config.network, rec.epoch + 1);
        }
    };

    TrainOutputs out;
    out.log = train(params, state, config.network, config.train, patches, start_epoch, on_epoch);

    out.checkpoint_path = (base / "checkpoint.bin").string();
    save_checkpoint(params, config.network, out.checkpoint_path);

    out.log_path = (base / "train.log").string();
    std::ofstream os(out.log_path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open log for writing: " + out.log_path);
    os << training_log_header(config, patches.size());
    for (const auto& rec : out.log) {
        os << rec.epoch << " " << fmt_e(rec.mean_loss) << " " << fmt_g(rec.lr_body) << "\n";
    }
    if (!os) throw std::runtime_error("write failure on log: " + out.log_path);
    return out;
}

TensorF cmd_fuse(const std::string& checkpoint_path, const std::string& ms_path,
                 const std::string& pan_path, int scale, const std::string& out_path,
                 const FuseOptions& options) {
    auto [params, spec] = load_checkpoint(checkpoint_path);
    ScenePair scene;
    scene.ms = read_tensor(ms_path);
    scene.pan = read_tensor(pan_path);
    scene.scale = scale;
    if (scene.ms.dims().c != spec.bands) {
        throw std::runtime_error("checkpoint was trained for " + std::to_string(spec.bands) +
                                 " bands but " + ms_path + " has " +
                                 std::to_string(scene.ms.dims().c));
    }
    const TensorF g = build_input(scene);
    const TensorF fused = forward(params, spec, g);
    write_tensor(out_path, fused);
    if (!options.truecolor_path.empty()) {
        export_truecolor(fused, options.truecolor_bands, options.truecolor_path);
    }
    return fused;
}

MetricsReport cmd_evaluate(const std::string& fused_path, const std::string& reference_path,
                           int scale, int window, const std::string& out_path) {
    const TensorF fused = read_tensor(fused_path);
    const TensorF reference = read_tensor(reference_path);
    const MetricsReport report = evaluate_all(fused, reference, scale, window);
    if (!out_path.empty()) {
        std::ofstream os(out_path, std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open report for writing: " + out_path);
        os << report.kv_record();
        if (!os) throw std::runtime_error("write failure on report: " + out_path);
    }
    return report;
}

std::vector<SweepRow> cmd_sweep_filters(const RunConfig& config, const std::vector<int>& sizes,
                                        const std::string& out_path, std::ostream* progress) {
    config.validate();
    if (sizes.empty()) throw std::invalid_argument("sweep-filters: no sizes given");
    for (int s : sizes) {
        if (s < 1 || s % 2 == 0) {
            throw std::invalid_argument("sweep-filters: sizes must be odd, got " + std::to_string(s));
        }
    }
    const std::vector<ManifestScene> scenes = load_scenes(config.manifest);
    const std::vector<PatchPair> train_patches = collect_patches(config, scenes, "train");

    std::vector<SweepRow> rows;
    for (int size : sizes) {
        RunConfig variant = config;
        variant.network.per_layer_filters.clear();
        variant.network.filter_h = variant.network.filter_w = size;
        variant.network.validate();

        NetworkParamsF params = init_network(variant.network, variant.train.seed);
        OptimizerStateF state = OptimizerStateF::zero_like(params);
        train(params, state, variant.network, variant.train, train_patches);

        double q_sum = 0.0, sam_sum = 0.0;
        int evaluated = 0;
        for (std::size_t i = 0; i < scenes.size(); ++i) {
            if (scenes[i].split != "test") continue;
            if (!scenes[i].scene.truth) {
                throw std::runtime_error("test scene " + std::to_string(i) +
                                         " has no ground truth; run simulate first");
            }
            const TensorF g = build_input(scenes[i].scene);
            const TensorF fused = forward(params, variant.network, g);
            q_sum += q_index(fused, *scenes[i].scene.truth, config.q_window);
            sam_sum += sam(fused, *scenes[i].scene.truth);
            ++evaluated;
        }
        if (evaluated == 0) throw std::runtime_error("sweep-filters: no test scenes in " + config.manifest);

        SweepRow row;
        row.size = size;
        row.q = q_sum / evaluated;
        row.sam = sam_sum / evaluated;
        rows.push_back(row);
        if (progress) {
            (*progress) << "filter " << size << "x" << size << " q " << fmt_g(row.q) << " sam "
                        << fmt_g(row.sam) << "\n";
        }
    }

    if (!out_path.empty()) {
        std::ofstream os(out_path, std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open table for writing: " + out_path);
        os << "# columns: filter_size q sam_degrees\n";
        for (const auto& r : rows) {
            os << r.size << " " << fmt_g(r.q) << " " << fmt_g(r.sam) << "\n";
        }
        if (!os) throw std::runtime_error("write failure on table: " + out_path);
    }
    return rows;
}

}  // namespace drpnn
