#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "drpnn/commands.hpp"

namespace {

drpnn::RunConfig load_config(const std::string& path, bool has_seed, std::uint64_t seed,
                             const std::string& out_dir) {
    drpnn::RunConfig cfg = drpnn::RunConfig::from_file(path);
    if (has_seed) cfg.train.seed = seed;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"drpnn: deep residual pan-sharpening — simulate, train, fuse, evaluate"};
    app.require_subcommand(1);

    // simulate
    std::string sim_manifest, sim_out;
    CLI::App* sim = app.add_subcommand("simulate", "reduced-resolution degradation of a dataset");
    sim->add_option("--manifest", sim_manifest, "input manifest (JSON)")->required();
    sim->add_option("--out", sim_out, "output directory")->required();

    // train
    std::string train_config, train_resume, train_out;
    std::uint64_t train_seed = 0;
    bool train_has_seed = false;
    CLI::App* tr = app.add_subcommand("train", "train a network from a run config");
    tr->add_option("--config", train_config, "run config (JSON)")->required();
    tr->add_option("--resume", train_resume, "periodic snapshot to resume from");
    tr->add_option("--seed", train_seed, "override config seed")->each([&](const std::string&) {
        train_has_seed = true;
    });
    tr->add_option("--out", train_out, "override output directory");

    // fuse
    std::string fuse_ckpt, fuse_ms, fuse_pan, fuse_out, fuse_png;
    std::vector<int> fuse_bands = {2, 1, 0};
    int fuse_scale = 4;
    CLI::App* fu = app.add_subcommand("fuse", "pan-sharpen one scene with a trained checkpoint");
    fu->add_option("--checkpoint", fuse_ckpt)->required();
    fu->add_option("--ms", fuse_ms, "MS tensor (PFT)")->required();
    fu->add_option("--pan", fuse_pan, "PAN tensor (PFT)")->required();
    fu->add_option("--scale", fuse_scale, "PAN/MS resolution ratio");
    fu->add_option("--out", fuse_out, "fused output tensor (PFT)")->required();
    fu->add_option("--truecolor", fuse_png, "also write a true-color PNG here");
    fu->add_option("--bands", fuse_bands, "r,g,b band indices for the PNG")->expected(3);

    // evaluate
    std::string eval_fused, eval_ref, eval_out;
    int eval_scale = 4, eval_window = 32;
    CLI::App* ev = app.add_subcommand("evaluate", "Q / ERGAS / SAM / SCC between two tensors");
    ev->add_option("--fused", eval_fused)->required();
    ev->add_option("--reference", eval_ref)->required();
    ev->add_option("--scale", eval_scale, "resolution ratio used by ERGAS");
    ev->add_option("--window", eval_window, "Q block size");
    ev->add_option("--out", eval_out, "write key-value report here");

    // sweep-filters
    std::string sweep_config, sweep_out;
    std::vector<int> sweep_sizes;
    std::uint64_t sweep_seed = 0;
    bool sweep_has_seed = false;
    CLI::App* sw = app.add_subcommand("sweep-filters", "train one model per filter size, tabulate Q and SAM");
    sw->add_option("--config", sweep_config, "run config (JSON)")->required();
    sw->add_option("--sizes", sweep_sizes, "odd filter sizes to sweep")->required();
    sw->add_option("--seed", sweep_seed, "override config seed")->each([&](const std::string&) {
        sweep_has_seed = true;
    });
    sw->add_option("--out", sweep_out, "table output path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            const std::string manifest = drpnn::cmd_simulate(sim_manifest, sim_out);
            std::cout << "wrote " << manifest << "\n";
        } else if (tr->parsed()) {
            const drpnn::RunConfig cfg = load_config(train_config, train_has_seed, train_seed, train_out);
            const drpnn::TrainOutputs out = drpnn::cmd_train(cfg, train_resume, &std::cout);
            std::cout << "wrote " << out.checkpoint_path << "\n";
            std::cout << "wrote " << out.log_path << "\n";
        } else if (fu->parsed()) {
            drpnn::FuseOptions opts;
            opts.truecolor_path = fuse_png;
            opts.truecolor_bands = {fuse_bands[0], fuse_bands[1], fuse_bands[2]};
            drpnn::cmd_fuse(fuse_ckpt, fuse_ms, fuse_pan, fuse_scale, fuse_out, opts);
            std::cout << "wrote " << fuse_out << "\n";
        } else if (ev->parsed()) {
            const drpnn::MetricsReport report =
                drpnn::cmd_evaluate(eval_fused, eval_ref, eval_scale, eval_window, eval_out);
            std::cout << report.line_record() << "\n";
        } else if (sw->parsed()) {
            drpnn::RunConfig cfg = drpnn::RunConfig::from_file(sweep_config);
            if (sweep_has_seed) cfg.train.seed = sweep_seed;
            drpnn::cmd_sweep_filters(cfg, sweep_sizes, sweep_out, &std::cout);
            if (!sweep_out.empty()) std::cout << "wrote " << sweep_out << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
