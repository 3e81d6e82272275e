#pragma once

#include <array>
#include <string>
#include <vector>

#include "drpnn/resample.hpp"
#include "drpnn/tensor.hpp"

namespace drpnn {

// PFT tensor file: magic "PFT1", u32 rank (1..4), u32 dims (slowest first),
// then row-major little-endian float32 payload. write_tensor always emits
// rank 4; read_tensor accepts lower ranks and left-pads the shape with 1s.
void write_tensor(const std::string& path, const TensorF& t);
TensorF read_tensor(const std::string& path);

// One manifest line item. Paths are stored relative to the manifest file.
struct SceneRecord {
    std::string ms_path;
    std::string pan_path;
    std::string truth_path;  // empty when the scene has no reference
    int scale = 4;
    int bands = 4;
    std::string split = "train";  // "train" or "test"
};

struct ManifestScene {
    ScenePair scene;
    std::string split;
    SceneRecord record;
};

// JSON manifest listing the scenes of a dataset. Loading reads every tensor
// and validates the ScenePair invariants; the first failing scene is
// reported with its path and reason. Order follows the manifest.
std::vector<ManifestScene> load_scenes(const std::string& manifest_path);
void write_manifest(const std::string& path, const std::vector<SceneRecord>& scenes);

// Selected bands linearly stretched per band from the 1st-99th percentile to
// 0..255 and written as an 8-bit RGB PNG. band_map holds the (r, g, b) band
// indices into img.
void export_truecolor(const TensorF& img, std::array<int, 3> band_map, const std::string& path);

}  // namespace drpnn
