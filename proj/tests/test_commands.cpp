#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "drpnn/commands.hpp"
#include "drpnn/resample.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace drpnn;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / "drpnn_test_commands" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string file_bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is.good());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// Small end-to-end dataset: observed scenes -> degraded manifest.
std::string degraded_manifest(const fs::path& root, int scenes = 3, std::uint64_t seed = 11) {
    synth::Options opt;
    opt.scenes = scenes;
    opt.pan_size = 64;
    opt.scale = 4;
    opt.bands = 4;
    opt.seed = seed;
    opt.train_fraction = 0.67;
    const std::string observed = synth::write_dataset((root / "observed").string(), opt);
    return cmd_simulate(observed, (root / "degraded").string());
}

RunConfig tiny_config(const std::string& manifest, const std::string& out_dir) {
    RunConfig cfg;
    cfg.network.layers = 3;
    cfg.network.bands = 4;
    cfg.network.hidden_channels = 6;
    cfg.network.filter_h = cfg.network.filter_w = 3;
    cfg.train.epochs = 6;
    cfg.train.batch_size = 2;
    cfg.train.lr_body = 0.05;
    cfg.train.lr_last = 0.02;
    cfg.train.decay_period = 3;
    cfg.train.seed = 5;
    cfg.manifest = manifest;
    cfg.patch_size = 8;
    cfg.stride = 8;
    cfg.q_window = 8;
    cfg.out_dir = out_dir;
    return cfg;
}

}  // namespace

TEST_CASE("run config defaults follow the reference settings") {
    RunConfig cfg = RunConfig::from_json_text("{}");
    CHECK(cfg.network.layers == 11);
    CHECK(cfg.network.bands == 4);
    CHECK(cfg.network.hidden_channels == 64);
    CHECK(cfg.network.filter_h == 7);
    CHECK(cfg.network.filter_w == 7);
    CHECK(cfg.network.relu_before_skip);
    CHECK(cfg.train.epochs == 300);
    CHECK(cfg.train.batch_size == 64);
    CHECK(cfg.train.lr_body == 0.05);
    CHECK(cfg.train.lr_last == 0.005);
    CHECK(cfg.train.momentum == 0.95);
    CHECK(cfg.train.decay_factor == 0.5);
    CHECK(cfg.train.decay_period == 60);
    CHECK(cfg.train.loss_norm == LossNorm::mean);
    CHECK(cfg.q_window == 32);
}

TEST_CASE("run config round trip and validation") {
    RunConfig cfg = RunConfig::from_json_text(R"({
        "network": {"layers": 5, "bands": 8, "hidden_channels": 24, "filter_size": 5},
        "train": {"epochs": 40, "batch_size": 4, "lr_body": 0.02, "lr_last": 0.002,
                   "momentum": 0.9, "decay_factor": 0.5, "decay_period": 10, "seed": 7, "loss": "sum"},
        "data": {"manifest": "m.json", "patch_size": 16, "stride": 8},
        "metrics": {"q_window": 16},
        "output": {"dir": "runs/a"}
    })");
    CHECK(cfg.network.bands == 8);
    CHECK(cfg.train.loss_norm == LossNorm::sum);
    RunConfig back = RunConfig::from_json_text(cfg.to_json_text());
    CHECK(back == cfg);

    // Per-layer filter list form.
    RunConfig per = RunConfig::from_json_text(
        R"({"network": {"layers": 3, "filter_size": [3, 5, 3]}})");
    CHECK(per.network.per_layer_filters.size() == 3);
    CHECK(per.network.filter_at(2)[0] == 5);
    CHECK(RunConfig::from_json_text(per.to_json_text()) == per);

    CHECK_THROWS_WITH_AS(RunConfig::from_json_text(R"({"trian": {}})"), doctest::Contains("trian"),
                         std::runtime_error);
    CHECK_THROWS_AS(RunConfig::from_json_text(R"({"train": {"loss": "huber"}})"), std::runtime_error);
    CHECK_THROWS_AS(RunConfig::from_json_text(R"({"network": {"filter_size": 4}})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(RunConfig::from_json_text("{nope"), std::runtime_error);
}

TEST_CASE("default config is echoed in the training log header") {
    RunConfig cfg;
    const std::string header = training_log_header(cfg, 123);
    CHECK(header.find("layers=11") != std::string::npos);
    CHECK(header.find("filter=7x7") != std::string::npos);
    CHECK(header.find("hidden_channels=64") != std::string::npos);
    CHECK(header.find("momentum=0.95") != std::string::npos);
    CHECK(header.find("decay_factor=0.5") != std::string::npos);
    CHECK(header.find("epochs=300") != std::string::npos);
    CHECK(header.find("batch_size=64") != std::string::npos);
    CHECK(header.find("patches=123") != std::string::npos);
}

TEST_CASE("cmd_simulate degrades every scene and populates truth") {
    const fs::path root = fresh_dir("simulate");
    synth::Options opt;
    opt.scenes = 2;
    opt.pan_size = 64;
    opt.seed = 3;
    const std::string observed = synth::write_dataset((root / "observed").string(), opt);
    const std::string degraded = cmd_simulate(observed, (root / "degraded").string());

    auto before = load_scenes(observed);
    auto after = load_scenes(degraded);
    REQUIRE(after.size() == 2);
    for (std::size_t i = 0; i < after.size(); ++i) {
        REQUIRE(after[i].scene.truth.has_value());
        CHECK(*after[i].scene.truth == before[i].scene.ms);  // truth is the untouched observed MS
        CHECK(after[i].scene.ms.dims().h == before[i].scene.ms.dims().h / 4);
        CHECK(after[i].split == before[i].split);
    }

    SUBCASE("rerun is bitwise identical") {
        const std::string again = cmd_simulate(observed, (root / "degraded2").string());
        auto a = load_scenes(degraded);
        auto b = load_scenes(again);
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].scene.ms == b[i].scene.ms);
            CHECK(a[i].scene.pan == b[i].scene.pan);
            CHECK(*a[i].scene.truth == *b[i].scene.truth);
        }
    }
}

TEST_CASE("cmd_simulate fails cleanly when a scene needs cropping") {
    const fs::path root = fresh_dir("simulate_fail");
    const fs::path obs = root / "observed";
    fs::create_directories(obs);

    // Scene 0 fine, scene 1 indivisible (10 % 4 != 0).
    Rng rng(4);
    write_tensor((obs / "ok_ms.pft").string(), oracle::random_tensor<float>(rng, Dims{1, 4, 8, 8}));
    write_tensor((obs / "ok_pan.pft").string(), oracle::random_tensor<float>(rng, Dims{1, 1, 32, 32}));
    write_tensor((obs / "bad_ms.pft").string(), oracle::random_tensor<float>(rng, Dims{1, 4, 10, 10}));
    write_tensor((obs / "bad_pan.pft").string(), oracle::random_tensor<float>(rng, Dims{1, 1, 40, 40}));
    std::vector<SceneRecord> recs(2);
    recs[0] = {"ok_ms.pft", "ok_pan.pft", "", 4, 4, "train"};
    recs[1] = {"bad_ms.pft", "bad_pan.pft", "", 4, 4, "train"};
    const std::string manifest = (obs / "manifest.json").string();
    write_manifest(manifest, recs);

    const fs::path out = root / "degraded";
    CHECK_THROWS_WITH_AS(cmd_simulate(manifest, out.string()), doctest::Contains("crop"),
                         std::runtime_error);
    // No partial output.
    CHECK((!fs::exists(out) || fs::is_empty(out)));
}

TEST_CASE("cmd_train writes checkpoint and deterministic log") {
    const fs::path root = fresh_dir("train");
    const std::string manifest = degraded_manifest(root);

    RunConfig cfg_a = tiny_config(manifest, (root / "run_a").string());
    TrainOutputs a = cmd_train(cfg_a);
    CHECK(fs::exists(a.checkpoint_path));
    CHECK(fs::exists(a.log_path));
    REQUIRE(a.log.size() == 6);

    RunConfig cfg_b = cfg_a;
    cfg_b.out_dir = (root / "run_b").string();
    TrainOutputs b = cmd_train(cfg_b);

    CHECK(file_bytes(a.checkpoint_path) == file_bytes(b.checkpoint_path));
    CHECK(file_bytes(a.log_path) == file_bytes(b.log_path));

    // Different seed diverges.
    RunConfig cfg_c = cfg_a;
    cfg_c.out_dir = (root / "run_c").string();
    cfg_c.train.seed = 6;
    TrainOutputs c = cmd_train(cfg_c);
    CHECK(file_bytes(a.checkpoint_path) != file_bytes(c.checkpoint_path));

    // The log file carries the header and one line per epoch.
    const std::string log = file_bytes(a.log_path);
    CHECK(log.find("# drpnn training log") == 0);
    CHECK(log.find("layers=3") != std::string::npos);
    CHECK(log.find("\n0 ") != std::string::npos);
    CHECK(log.find("\n5 ") != std::string::npos);
}

TEST_CASE("cmd_train resume reproduces the uninterrupted run") {
    const fs::path root = fresh_dir("resume");
    const std::string manifest = degraded_manifest(root);

    RunConfig full = tiny_config(manifest, (root / "full").string());
    full.train.epochs = 6;
    full.train.decay_period = 3;  // periodic snapshot at epoch 3
    TrainOutputs uninterrupted = cmd_train(full);

    const std::string snapshot = (fs::path(full.out_dir) / "state_epoch0003.bin").string();
    REQUIRE(fs::exists(snapshot));

    RunConfig resumed = full;
    resumed.out_dir = (root / "resumed").string();
    TrainOutputs rest = cmd_train(resumed, snapshot);

    CHECK(file_bytes(uninterrupted.checkpoint_path) == file_bytes(rest.checkpoint_path));
    REQUIRE(rest.log.size() == 3);  // epochs 3..5
    CHECK(rest.log.front().epoch == 3);
    CHECK(rest.log.back().mean_loss == uninterrupted.log.back().mean_loss);

    // Snapshot from a different topology is rejected.
    RunConfig other = resumed;
    other.network.hidden_channels = 7;
    other.out_dir = (root / "bad").string();
    CHECK_THROWS_AS(cmd_train(other, snapshot), std::runtime_error);
}

TEST_CASE("cmd_fuse: zero-residual identity checkpoint reproduces upsampled MS") {
    const fs::path root = fresh_dir("fuse");
    NetworkSpec spec;
    spec.layers = 3;
    spec.bands = 4;
    spec.hidden_channels = 6;
    spec.filter_h = spec.filter_w = 3;
    NetworkParamsF params = init_network(spec, 1);
    for (int l = 0; l < spec.layers - 1; ++l) {
        params.layers[l].weights.fill(0.0f);
        for (auto& bv : params.layers[l].bias) bv = 0.0f;
    }
    params.layers[2].weights.fill(0.0f);
    for (auto& bv : params.layers[2].bias) bv = 0.0f;
    for (int s = 0; s < spec.bands; ++s) params.layers[2].weights(s, s, 1, 1) = 1.0f;
    const std::string ckpt = (root / "identity.ckpt").string();
    save_checkpoint(params, spec, ckpt);

    drpnn::ScenePair scene = synth::make_scene(77, 32, 4, 4);
    const std::string ms_path = (root / "ms.pft").string();
    const std::string pan_path = (root / "pan.pft").string();
    write_tensor(ms_path, scene.ms);
    write_tensor(pan_path, scene.pan);

    const std::string out = (root / "fused.pft").string();
    FuseOptions opts;
    opts.truecolor_path = (root / "fused.png").string();
    TensorF fused = cmd_fuse(ckpt, ms_path, pan_path, 4, out, opts);

    CHECK(fused.dims() == Dims{1, 4, 32, 32});
    CHECK(fused == bicubic_upsample(scene.ms, 4));
    CHECK(fs::exists(out));
    CHECK(fs::exists(opts.truecolor_path));
    CHECK(read_tensor(out) == fused);

    SUBCASE("rerun is bitwise identical") {
        const std::string out2 = (root / "fused2.pft").string();
        cmd_fuse(ckpt, ms_path, pan_path, 4, out2);
        CHECK(file_bytes(out) == file_bytes(out2));
    }

    SUBCASE("band mismatch is rejected") {
        drpnn::ScenePair wide = synth::make_scene(78, 32, 4, 8);
        const std::string wide_ms = (root / "wide_ms.pft").string();
        write_tensor(wide_ms, wide.ms);
        CHECK_THROWS_WITH_AS(cmd_fuse(ckpt, wide_ms, pan_path, 4, (root / "x.pft").string()),
                             doctest::Contains("bands"), std::runtime_error);
    }
}

TEST_CASE("cmd_evaluate on an identity pair writes a perfect report") {
    const fs::path root = fresh_dir("evaluate");
    drpnn::ScenePair scene = synth::make_scene(5, 32, 4, 4);
    TensorF img = bicubic_upsample(scene.ms, 4);
    const std::string a = (root / "a.pft").string();
    write_tensor(a, img);
    const std::string report_path = (root / "report.txt").string();
    MetricsReport rep = cmd_evaluate(a, a, 4, 8, report_path);
    CHECK(std::abs(rep.q - 1.0) < 1e-6);
    CHECK(rep.ergas < 1e-6);
    CHECK(rep.sam_degrees < 1e-6);
    CHECK(std::abs(rep.scc - 1.0) < 1e-6);

    const std::string report = file_bytes(report_path);
    CHECK(report.find("q ") == 0);
    CHECK(report.find("scale 4") != std::string::npos);
    CHECK(report.find("q_window 8") != std::string::npos);
}

TEST_CASE("cmd_sweep_filters produces one deterministic row per size") {
    const fs::path root = fresh_dir("sweep");
    const std::string manifest = degraded_manifest(root);
    RunConfig cfg = tiny_config(manifest, (root / "out").string());
    cfg.train.epochs = 4;

    const std::string table_a = (root / "table_a.txt").string();
    auto rows_a = cmd_sweep_filters(cfg, {3, 5}, table_a);
    REQUIRE(rows_a.size() == 2);
    CHECK(rows_a[0].size == 3);
    CHECK(rows_a[1].size == 5);
    for (const auto& r : rows_a) {
        CHECK(std::isfinite(r.q));
        CHECK(std::isfinite(r.sam));
    }

    const std::string table_b = (root / "table_b.txt").string();
    auto rows_b = cmd_sweep_filters(cfg, {3, 5}, table_b);
    CHECK(file_bytes(table_a) == file_bytes(table_b));
    for (std::size_t i = 0; i < rows_a.size(); ++i) {
        CHECK(rows_a[i].q == rows_b[i].q);
        CHECK(rows_a[i].sam == rows_b[i].sam);
    }

    CHECK_THROWS_AS(cmd_sweep_filters(cfg, {4}, ""), std::invalid_argument);
    CHECK_THROWS_AS(cmd_sweep_filters(cfg, {}, ""), std::invalid_argument);
}
