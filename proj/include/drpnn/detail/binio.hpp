#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

// Little-endian binary serialization helpers shared by the checkpoint,
// train-state and tensor-file writers.
namespace drpnn::detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
    const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                           static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(bytes, 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
    write_u32(os, static_cast<std::uint32_t>(v & 0xffffffffull));
    write_u32(os, static_cast<std::uint32_t>(v >> 32));
}

inline void write_f32(std::ostream& os, float f) {
    write_u32(os, std::bit_cast<std::uint32_t>(f));
}

inline void write_f32_array(std::ostream& os, const float* data, std::int64_t count) {
    std::vector<char> buf(static_cast<std::size_t>(count) * 4);
    for (std::int64_t i = 0; i < count; ++i) {
        const std::uint32_t v = std::bit_cast<std::uint32_t>(data[i]);
        buf[static_cast<std::size_t>(i) * 4 + 0] = static_cast<char>(v & 0xff);
        buf[static_cast<std::size_t>(i) * 4 + 1] = static_cast<char>((v >> 8) & 0xff);
        buf[static_cast<std::size_t>(i) * 4 + 2] = static_cast<char>((v >> 16) & 0xff);
        buf[static_cast<std::size_t>(i) * 4 + 3] = static_cast<char>((v >> 24) & 0xff);
    }
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline std::uint32_t read_u32(std::istream& is, const std::string& what) {
    unsigned char bytes[4];
    if (!is.read(reinterpret_cast<char*>(bytes), 4)) {
        throw std::runtime_error("truncated file while reading " + what);
    }
    return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
           (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

inline std::uint64_t read_u64(std::istream& is, const std::string& what) {
    const std::uint64_t lo = read_u32(is, what);
    const std::uint64_t hi = read_u32(is, what);
    return lo | (hi << 32);
}

inline void read_f32_array(std::istream& is, float* data, std::int64_t count, const std::string& what) {
    std::vector<char> buf(static_cast<std::size_t>(count) * 4);
    if (!is.read(buf.data(), static_cast<std::streamsize>(buf.size()))) {
        throw std::runtime_error("truncated file while reading " + what);
    }
    for (std::int64_t i = 0; i < count; ++i) {
        const auto* b = reinterpret_cast<const unsigned char*>(buf.data() + static_cast<std::size_t>(i) * 4);
        const std::uint32_t v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                                (static_cast<std::uint32_t>(b[2]) << 16) |
                                (static_cast<std::uint32_t>(b[3]) << 24);
        data[i] = std::bit_cast<float>(v);
    }
}

}  // namespace drpnn::detail
