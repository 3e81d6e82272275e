#include "drpnn/dataset_io.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "drpnn/detail/binio.hpp"

namespace drpnn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'P', 'F', 'T', '1'};

}  // namespace

void write_tensor(const std::string& path, const TensorF& t) {
    if (t.empty()) throw std::invalid_argument("write_tensor: empty tensor");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open tensor file for writing: " + path);
    os.write(kMagic, 4);
    detail::write_u32(os, 4);
    const Dims d = t.dims();
    detail::write_u32(os, static_cast<std::uint32_t>(d.n));
    detail::write_u32(os, static_cast<std::uint32_t>(d.c));
    detail::write_u32(os, static_cast<std::uint32_t>(d.h));
    detail::write_u32(os, static_cast<std::uint32_t>(d.w));
    detail::write_f32_array(os, t.data(), t.size());
    if (!os) throw std::runtime_error("write failure on tensor file: " + path);
}

TensorF read_tensor(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open tensor file: " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::string(magic, 4) != std::string(kMagic, 4)) {
        throw std::runtime_error(path + ": not a PFT tensor file (bad magic)");
    }
    const std::uint32_t rank = detail::read_u32(is, path + ": rank");
    if (rank < 1 || rank > 4) {
        throw std::runtime_error(path + ": rank " + std::to_string(rank) + " outside 1..4");
    }
    std::uint32_t dims[4] = {1, 1, 1, 1};
    std::uint64_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        const std::uint32_t v = detail::read_u32(is, path + ": dims");
        if (v == 0) throw std::runtime_error(path + ": zero dimension in header");
        dims[4 - rank + i] = v;
        count *= v;
    }
    if (count > (1ull << 31)) {
        throw std::runtime_error(path + ": dims product " + std::to_string(count) +
                                 " exceeds payload limit");
    }
    TensorF t(Dims{static_cast<int>(dims[0]), static_cast<int>(dims[1]),
                   static_cast<int>(dims[2]), static_cast<int>(dims[3])});
    detail::read_f32_array(is, t.data(), t.size(), path + ": payload");
    is.peek();
    if (!is.eof()) throw std::runtime_error(path + ": payload longer than dims product");
    return t;
}

void write_manifest(const std::string& path, const std::vector<SceneRecord>& scenes) {
    json doc;
    doc["scenes"] = json::array();
    for (const auto& s : scenes) {
        json j;
        j["ms"] = s.ms_path;
        j["pan"] = s.pan_path;
        if (!s.truth_path.empty()) j["truth"] = s.truth_path;
        j["scale"] = s.scale;
        j["bands"] = s.bands;
        j["split"] = s.split;
        doc["scenes"].push_back(std::move(j));
    }
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open manifest for writing: " + path);
    os << doc.dump(2) << "\n";
    if (!os) throw std::runtime_error("write failure on manifest: " + path);
}

std::vector<ManifestScene> load_scenes(const std::string& manifest_path) {
    std::ifstream is(manifest_path);
    if (!is) throw std::runtime_error("cannot open manifest: " + manifest_path);
    json doc;
    try {
        is >> doc;
    } catch (const json::exception& e) {
        throw std::runtime_error(manifest_path + ": invalid JSON: " + e.what());
    }
    if (!doc.contains("scenes") || !doc["scenes"].is_array()) {
        throw std::runtime_error(manifest_path + ": missing \"scenes\" array");
    }
    const fs::path base = fs::path(manifest_path).parent_path();

    std::vector<ManifestScene> out;
    int index = 0;
    for (const auto& j : doc["scenes"]) {
        SceneRecord rec;
        try {
            rec.ms_path = j.at("ms").get<std::string>();
            rec.pan_path = j.at("pan").get<std::string>();
            rec.truth_path = j.value("truth", std::string{});
            rec.scale = j.value("scale", 4);
            rec.bands = j.at("bands").get<int>();
            rec.split = j.value("split", std::string{"train"});
        } catch (const json::exception& e) {
            throw std::runtime_error(manifest_path + ": scene " + std::to_string(index) +
                                     " is malformed: " + e.what());
        }
        if (rec.split != "train" && rec.split != "test") {
            throw std::runtime_error(manifest_path + ": scene " + std::to_string(index) +
                                     " has unknown split \"" + rec.split + "\"");
        }

        ManifestScene ms;
        ms.record = rec;
        ms.split = rec.split;
        ms.scene.scale = rec.scale;
        const std::string ms_file = (base / rec.ms_path).string();
        const std::string pan_file = (base / rec.pan_path).string();
        ms.scene.ms = read_tensor(ms_file);
        ms.scene.pan = read_tensor(pan_file);
        if (!rec.truth_path.empty()) {
            ms.scene.truth = read_tensor((base / rec.truth_path).string());
        }
        if (ms.scene.ms.dims().c != rec.bands) {
            throw std::runtime_error(ms_file + ": manifest declares " + std::to_string(rec.bands) +
                                     " bands but tensor has " + std::to_string(ms.scene.ms.dims().c));
        }
        try {
            ms.scene.validate();
        } catch (const std::exception& e) {
            throw std::runtime_error(manifest_path + ": scene " + std::to_string(index) + " (" +
                                     rec.ms_path + ") fails validation: " + e.what());
        }
        out.push_back(std::move(ms));
        ++index;
    }
    return out;
}

namespace {

// Linear interpolation quantile of sorted values, q in [0, 1].
float sorted_quantile(const std::vector<float>& sorted, double q) {
    const double pos = q * (static_cast<double>(sorted.size()) - 1.0);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return static_cast<float>((1.0 - frac) * sorted[lo] + frac * sorted[hi]);
}

void write_png_rgb8(const std::string& path, int width, int height,
                    const std::vector<unsigned char>& rgb) {
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw std::runtime_error("cannot open image for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw std::runtime_error("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw std::runtime_error("libpng write failure: " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y) {
        png_write_row(png, const_cast<png_bytep>(rgb.data() + static_cast<std::size_t>(y) * width * 3));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

}  // namespace

void export_truecolor(const TensorF& img, std::array<int, 3> band_map, const std::string& path) {
    const Dims d = img.dims();
    if (d.n != 1) throw std::invalid_argument("export_truecolor: expected a single-scene tensor");
    for (int b : band_map) {
        if (b < 0 || b >= d.c) {
            throw std::invalid_argument("export_truecolor: band index " + std::to_string(b) +
                                        " outside 0.." + std::to_string(d.c - 1));
        }
    }
    const std::int64_t plane = static_cast<std::int64_t>(d.h) * d.w;
    std::vector<unsigned char> rgb(static_cast<std::size_t>(plane) * 3);
    std::vector<float> sorted(static_cast<std::size_t>(plane));
    for (int ch = 0; ch < 3; ++ch) {
        const int b = band_map[static_cast<std::size_t>(ch)];
        const float* src = img.row(0, b, 0);
        std::copy(src, src + plane, sorted.begin());
        std::sort(sorted.begin(), sorted.end());
        const float p1 = sorted_quantile(sorted, 0.01);
        const float p99 = sorted_quantile(sorted, 0.99);
        const float range = p99 - p1;
        for (std::int64_t i = 0; i < plane; ++i) {
            unsigned char v;
            if (range <= 0.0f) {
                v = 128;  // flat band renders mid-gray
            } else {
                const float t = (src[i] - p1) / range;
                v = static_cast<unsigned char>(std::clamp(t * 255.0f, 0.0f, 255.0f) + 0.5f);
            }
            rgb[static_cast<std::size_t>(i) * 3 + ch] = v;
        }
    }
    write_png_rgb8(path, d.w, d.h, rgb);
}

}  // namespace drpnn
