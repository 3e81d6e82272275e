#include "drpnn/resample.hpp"

#include <algorithm>

#include "drpnn/rng.hpp"

namespace drpnn {

namespace detail {

AxisTaps upsample_taps(int in_len, int scale) {
    AxisTaps taps;
    taps.taps_per_output = 4;
    const int out_len = in_len * scale;
    taps.indices.resize(static_cast<std::size_t>(out_len) * 4);
    taps.weights.resize(static_cast<std::size_t>(out_len) * 4);
    for (int xo = 0; xo < out_len; ++xo) {
        const double src = (xo + 0.5) / scale - 0.5;
        const int base = static_cast<int>(std::floor(src));
        for (int t = 0; t < 4; ++t) {
            const int j = base - 1 + t;
            taps.indices[static_cast<std::size_t>(xo) * 4 + t] = std::clamp(j, 0, in_len - 1);
            taps.weights[static_cast<std::size_t>(xo) * 4 + t] = keys_weight(static_cast<double>(j) - src);
        }
    }
    return taps;
}

AxisTaps downsample_taps(int in_len, int scale) {
    AxisTaps taps;
    taps.taps_per_output = 4 * scale;
    const int out_len = in_len / scale;
    taps.indices.resize(static_cast<std::size_t>(out_len) * taps.taps_per_output);
    taps.weights.resize(static_cast<std::size_t>(out_len) * taps.taps_per_output);
    for (int xo = 0; xo < out_len; ++xo) {
        const double src = (xo + 0.5) * scale - 0.5;
        // First integer strictly above src - 2*scale; exactly 4*scale taps
        // cover the stretched support (-2*scale, 2*scale).
        const int j0 = static_cast<int>(std::floor(src - 2.0 * scale)) + 1;
        double wsum = 0.0;
        const std::size_t off = static_cast<std::size_t>(xo) * taps.taps_per_output;
        for (int t = 0; t < taps.taps_per_output; ++t) {
            const int j = j0 + t;
            const double w = keys_weight((static_cast<double>(j) - src) / scale);
            taps.indices[off + t] = std::clamp(j, 0, in_len - 1);
            taps.weights[off + t] = w;
            wsum += w;
        }
        for (int t = 0; t < taps.taps_per_output; ++t) taps.weights[off + t] /= wsum;
    }
    return taps;
}

}  // namespace detail

void ScenePair::validate() const {
    if (scale < 2) throw std::invalid_argument("ScenePair: scale must be >= 2");
    const Dims md = ms.dims();
    const Dims pd = pan.dims();
    if (md.n != 1 || pd.n != 1 || pd.c != 1) {
        throw std::invalid_argument("ScenePair: ms must be (1,S,h,w) and pan (1,1,H,W); got ms " +
                                    md.str() + ", pan " + pd.str());
    }
    if (pd.h != md.h * scale || pd.w != md.w * scale) {
        throw std::invalid_argument("ScenePair: pan dims " + pd.str() + " are not scale (" +
                                    std::to_string(scale) + ") times ms dims " + md.str());
    }
    if (truth) {
        const Dims td = truth->dims();
        if (td.n != 1 || td.c != md.c || td.h != pd.h || td.w != pd.w) {
            throw std::invalid_argument("ScenePair: truth dims " + td.str() +
                                        " do not match (1," + std::to_string(md.c) + "," +
                                        std::to_string(pd.h) + "," + std::to_string(pd.w) + ")");
        }
    }
}

TensorF build_input(const ScenePair& scene) {
    scene.validate();
    const TensorF up = bicubic_upsample(scene.ms, scene.scale);
    const Dims ud = up.dims();
    TensorF g(Dims{1, ud.c + 1, ud.h, ud.w});
    const std::int64_t plane = static_cast<std::int64_t>(ud.h) * ud.w;
    std::copy(up.data(), up.data() + up.size(), g.data());
    std::copy(scene.pan.data(), scene.pan.data() + plane, g.data() + up.size());
    return g;
}

ScenePair wald_simulate(const ScenePair& scene) {
    scene.validate();
    if (scene.truth) {
        throw std::invalid_argument("wald_simulate: scene already carries a ground truth image");
    }
    const Dims md = scene.ms.dims();
    if (md.h % scene.scale != 0 || md.w % scene.scale != 0) {
        const int ch = (md.h / scene.scale) * scene.scale;
        const int cw = (md.w / scene.scale) * scene.scale;
        throw std::invalid_argument("wald_simulate: ms dims " + std::to_string(md.h) + "x" +
                                    std::to_string(md.w) + " not divisible by scale " +
                                    std::to_string(scene.scale) + "; crop ms to " + std::to_string(ch) +
                                    "x" + std::to_string(cw) + " (and pan to " +
                                    std::to_string(ch * scene.scale) + "x" +
                                    std::to_string(cw * scene.scale) + ") first");
    }
    ScenePair reduced;
    reduced.scale = scene.scale;
    reduced.ms = bicubic_downsample(scene.ms, scene.scale);
    reduced.pan = bicubic_downsample(scene.pan, scene.scale);
    reduced.truth = scene.ms;
    reduced.validate();
    return reduced;
}

std::vector<PatchPair> extract_patches(const ScenePair& scene, int patch, int stride,
                                       std::uint64_t seed) {
    scene.validate();
    if (!scene.truth) throw std::invalid_argument("extract_patches: scene has no ground truth");
    if (stride < 1) throw std::invalid_argument("extract_patches: stride must be >= 1");
    const TensorF g = build_input(scene);
    const TensorF& truth = *scene.truth;
    const Dims gd = g.dims();
    if (patch < 1 || patch > gd.h || patch > gd.w) {
        throw std::invalid_argument("extract_patches: patch size " + std::to_string(patch) +
                                    " does not fit scene dims " + std::to_string(gd.h) + "x" +
                                    std::to_string(gd.w));
    }

    std::vector<std::pair<int, int>> origins;
    for (int y = 0; y + patch <= gd.h; y += stride) {
        for (int x = 0; x + patch <= gd.w; x += stride) origins.emplace_back(y, x);
    }
    Rng rng(seed);
    rng.shuffle(origins);

    std::vector<PatchPair> out;
    out.reserve(origins.size());
    for (const auto& [oy, ox] : origins) {
        PatchPair p;
        p.input = TensorF(Dims{1, gd.c, patch, patch});
        p.truth = TensorF(Dims{1, truth.dims().c, patch, patch});
        for (int c = 0; c < gd.c; ++c) {
            for (int y = 0; y < patch; ++y) {
                const float* src = g.row(0, c, oy + y) + ox;
                std::copy(src, src + patch, p.input.row(0, c, y));
            }
        }
        for (int c = 0; c < truth.dims().c; ++c) {
            for (int y = 0; y < patch; ++y) {
                const float* src = truth.row(0, c, oy + y) + ox;
                std::copy(src, src + patch, p.truth.row(0, c, y));
            }
        }
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace drpnn
