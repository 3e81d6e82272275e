#include "support/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "drpnn/dataset_io.hpp"
#include "drpnn/rng.hpp"

namespace synth {

using drpnn::Dims;
using drpnn::Rng;
using drpnn::TensorF;

namespace {

constexpr int kMaterials = 6;

// Abundance field per material: smooth Gaussian bumps plus hard-edged
// rectangles, so the scene carries both gentle gradients and sharp
// boundaries between distinct spectra.
void add_bump(std::vector<double>& field, int size, double cy, double cx, double sigma, double amp) {
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
            field[static_cast<std::size_t>(y) * size + x] += amp * std::exp(-d2 * inv);
        }
    }
}

void add_rect(std::vector<double>& field, int size, int y0, int x0, int h, int w, double amp) {
    for (int y = std::max(0, y0); y < std::min(size, y0 + h); ++y) {
        for (int x = std::max(0, x0); x < std::min(size, x0 + w); ++x) {
            field[static_cast<std::size_t>(y) * size + x] += amp;
        }
    }
}

}  // namespace

drpnn::ScenePair make_scene(std::uint64_t seed, int pan_size, int scale, int bands) {
    Rng rng(seed);
    const int size = pan_size;

    // Material spectra in [0.2, 1.0].
    std::vector<double> spectra(static_cast<std::size_t>(kMaterials) * bands);
    for (auto& s : spectra) s = 0.2 + 0.8 * rng.next_double();

    // Abundance fields.
    std::vector<std::vector<double>> fields(kMaterials,
                                            std::vector<double>(static_cast<std::size_t>(size) * size, 0.05));
    for (int m = 0; m < kMaterials; ++m) {
        const int bumps = 2 + static_cast<int>(rng.next_below(3));
        for (int b = 0; b < bumps; ++b) {
            add_bump(fields[m], size, rng.next_double() * size, rng.next_double() * size,
                     2.0 + rng.next_double() * 0.15 * size, 0.3 + rng.next_double());
        }
        const int rects = 1 + static_cast<int>(rng.next_below(3));
        for (int r = 0; r < rects; ++r) {
            add_rect(fields[m], size, static_cast<int>(rng.next_below(static_cast<std::uint64_t>(size))),
                     static_cast<int>(rng.next_below(static_cast<std::uint64_t>(size))),
                     4 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(size / 3))),
                     4 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(size / 3))),
                     0.4 + rng.next_double());
        }
    }

    // Hidden truth: normalized mixture of material spectra.
    TensorF truth(Dims{1, bands, size, size});
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            double total = 0.0;
            for (int m = 0; m < kMaterials; ++m) total += fields[m][static_cast<std::size_t>(y) * size + x];
            for (int b = 0; b < bands; ++b) {
                double v = 0.0;
                for (int m = 0; m < kMaterials; ++m) {
                    v += fields[m][static_cast<std::size_t>(y) * size + x] *
                         spectra[static_cast<std::size_t>(m) * bands + b];
                }
                truth(0, b, y, x) = static_cast<float>(v / total);
            }
        }
    }

    // PAN: exact uniform mixing of the truth bands.
    drpnn::ScenePair scene;
    scene.scale = scale;
    scene.pan = TensorF(Dims{1, 1, size, size});
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            double v = 0.0;
            for (int b = 0; b < bands; ++b) v += truth(0, b, y, x);
            scene.pan(0, 0, y, x) = static_cast<float>(v / bands);
        }
    }

    // Observed MS: anti-aliased reduction of the truth.
    scene.ms = drpnn::bicubic_downsample(truth, scale);
    return scene;
}

std::string write_dataset(const std::string& dir, const Options& opt) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::vector<drpnn::SceneRecord> records;
    const int train_count = static_cast<int>(opt.scenes * opt.train_fraction + 0.5);
    for (int i = 0; i < opt.scenes; ++i) {
        drpnn::ScenePair scene =
            make_scene(drpnn::mix_seed(opt.seed, static_cast<std::uint64_t>(i)), opt.pan_size,
                       opt.scale, opt.bands);
        char stem[32];
        std::snprintf(stem, sizeof(stem), "synth%04d", i);
        drpnn::SceneRecord rec;
        rec.ms_path = std::string(stem) + "_ms.pft";
        rec.pan_path = std::string(stem) + "_pan.pft";
        rec.scale = opt.scale;
        rec.bands = opt.bands;
        rec.split = i < train_count ? "train" : "test";
        drpnn::write_tensor((fs::path(dir) / rec.ms_path).string(), scene.ms);
        drpnn::write_tensor((fs::path(dir) / rec.pan_path).string(), scene.pan);
        records.push_back(std::move(rec));
    }
    const std::string manifest = (fs::path(dir) / "manifest.json").string();
    drpnn::write_manifest(manifest, records);
    return manifest;
}

}  // namespace synth
