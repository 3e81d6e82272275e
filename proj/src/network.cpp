#include "drpnn/network.hpp"

#include <fstream>

#include "drpnn/detail/binio.hpp"

namespace drpnn {

namespace {

constexpr char kMagic[4] = {'D', 'R', 'P', 'N'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

namespace detail {

void write_spec(std::ostream& os, const NetworkSpec& spec) {
    write_u32(os, static_cast<std::uint32_t>(spec.layers));
    write_u32(os, static_cast<std::uint32_t>(spec.bands));
    write_u32(os, static_cast<std::uint32_t>(spec.hidden_channels));
    write_u32(os, spec.relu_before_skip ? 1u : 0u);
    for (int l = 1; l <= spec.layers; ++l) {
        auto [kh, kw] = spec.filter_at(l);
        write_u32(os, static_cast<std::uint32_t>(kh));
        write_u32(os, static_cast<std::uint32_t>(kw));
    }
}

NetworkSpec read_spec(std::istream& is, const std::string& path) {
    NetworkSpec spec;
    spec.layers = static_cast<int>(read_u32(is, path + ": layer count"));
    spec.bands = static_cast<int>(read_u32(is, path + ": band count"));
    spec.hidden_channels = static_cast<int>(read_u32(is, path + ": hidden channels"));
    spec.relu_before_skip = read_u32(is, path + ": relu flag") != 0;
    if (spec.layers < 2 || spec.layers > 1000 || spec.bands < 1 || spec.bands > 10000 ||
        spec.hidden_channels < 1) {
        throw std::runtime_error(path + ": implausible network header");
    }
    spec.per_layer_filters.resize(static_cast<std::size_t>(spec.layers));
    for (int l = 1; l <= spec.layers; ++l) {
        const int kh = static_cast<int>(read_u32(is, path + ": filter height"));
        const int kw = static_cast<int>(read_u32(is, path + ": filter width"));
        spec.per_layer_filters[static_cast<std::size_t>(l - 1)] = {kh, kw};
    }
    // Collapse a uniform filter table back to the plain representation.
    bool uniform = true;
    for (const auto& f : spec.per_layer_filters) {
        if (f != spec.per_layer_filters.front()) uniform = false;
    }
    if (uniform) {
        spec.filter_h = spec.per_layer_filters.front()[0];
        spec.filter_w = spec.per_layer_filters.front()[1];
        spec.per_layer_filters.clear();
    }
    spec.validate();
    return spec;
}

void write_params(std::ostream& os, const NetworkParamsF& params) {
    for (const auto& k : params.layers) {
        write_f32_array(os, k.weights.data(), k.weights.size());
        write_f32_array(os, k.bias.data(), static_cast<std::int64_t>(k.bias.size()));
    }
}

NetworkParamsF read_params(std::istream& is, const NetworkSpec& spec, const std::string& path) {
    NetworkParamsF params;
    params.layers.reserve(static_cast<std::size_t>(spec.layers));
    for (int l = 1; l <= spec.layers; ++l) {
        auto [kh, kw] = spec.filter_at(l);
        ConvKernelF k(spec.channels_at(l), spec.channels_at(l - 1), kh, kw);
        read_f32_array(is, k.weights.data(), k.weights.size(), path + ": layer " + std::to_string(l) + " weights");
        read_f32_array(is, k.bias.data(), static_cast<std::int64_t>(k.bias.size()),
                       path + ": layer " + std::to_string(l) + " bias");
        params.layers.push_back(std::move(k));
    }
    return params;
}

}  // namespace detail

void save_checkpoint(const NetworkParamsF& params, const NetworkSpec& spec, const std::string& path) {
    spec.validate();
    params.validate_against(spec);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    os.write(kMagic, 4);
    detail::write_u32(os, kVersion);
    detail::write_spec(os, spec);
    detail::write_params(os, params);
    if (!os) throw std::runtime_error("write failure on checkpoint: " + path);
}

std::pair<NetworkParamsF, NetworkSpec> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::string(magic, 4) != std::string(kMagic, 4)) {
        throw std::runtime_error(path + ": not a checkpoint file (bad magic)");
    }
    const std::uint32_t version = detail::read_u32(is, path + ": version");
    if (version != kVersion) {
        throw std::runtime_error(path + ": unsupported checkpoint version " + std::to_string(version));
    }
    NetworkSpec spec = detail::read_spec(is, path);
    NetworkParamsF params = detail::read_params(is, spec, path);
    is.peek();
    if (!is.eof()) throw std::runtime_error(path + ": trailing bytes after parameter data");
    params.validate_against(spec);
    return {std::move(params), spec};
}

}  // namespace drpnn
