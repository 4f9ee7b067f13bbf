// Checkpoint container: magic "CVEK", a 32-byte config fingerprint, then
// (name, shape, float32 data) records sorted by parameter name. All integers
// little-endian, all values stored as float32 regardless of compute type.
#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>

#include "veil/nn/layers.hpp"
#include "veil/sha256.hpp"

namespace veil::nn {

namespace detail {

inline void put_u32(std::ostream& os, uint32_t v) {
    uint8_t b[4] = {uint8_t(v), uint8_t(v >> 8), uint8_t(v >> 16), uint8_t(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t get_u32(std::istream& is) {
    uint8_t b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw FormatError("checkpoint: truncated");
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

}  // namespace detail

inline constexpr char kCheckpointMagic[4] = {'C', 'V', 'E', 'K'};

template <class T>
void save_checkpoint(const std::string& path, const ParamsT<T>& params,
                     const std::array<uint8_t, 32>& config_hash) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("checkpoint: cannot open for write: " + path);
    os.write(kCheckpointMagic, 4);
    os.write(reinterpret_cast<const char*>(config_hash.data()), 32);

    std::vector<std::pair<std::string, const TensorT<T>*>> sorted;
    for (auto& [name, node] : params.items) sorted.push_back({name, &node->val});
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    detail::put_u32(os, uint32_t(sorted.size()));
    for (auto& [name, tensor] : sorted) {
        detail::put_u32(os, uint32_t(name.size()));
        os.write(name.data(), std::streamsize(name.size()));
        detail::put_u32(os, uint32_t(tensor->shape.size()));
        for (int d : tensor->shape) detail::put_u32(os, uint32_t(d));
        for (T v : tensor->data) {
            float f = float(v);
            uint32_t bits;
            std::memcpy(&bits, &f, 4);
            detail::put_u32(os, bits);
        }
    }
    if (!os) throw IoError("checkpoint: write failed: " + path);
}

// Loads values into an existing registry. Names and shapes must match the
// registry exactly; the stored config hash must equal expected_hash unless
// ignore_hash is set.
template <class T>
void load_checkpoint(const std::string& path, ParamsT<T>& params,
                     const std::array<uint8_t, 32>& expected_hash, bool ignore_hash = false) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("checkpoint: cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw FormatError("checkpoint: bad magic in " + path);
    std::array<uint8_t, 32> stored{};
    is.read(reinterpret_cast<char*>(stored.data()), 32);
    if (!is) throw FormatError("checkpoint: truncated header in " + path);
    if (!ignore_hash && stored != expected_hash)
        throw ValidationError("checkpoint: config fingerprint mismatch in " + path);

    const uint32_t count = detail::get_u32(is);
    if (count != params.items.size())
        throw FormatError("checkpoint: parameter count mismatch in " + path);
    for (uint32_t r = 0; r < count; ++r) {
        const uint32_t name_len = detail::get_u32(is);
        if (name_len > 4096) throw FormatError("checkpoint: implausible name length");
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw FormatError("checkpoint: truncated name");
        auto node = params.find(name);
        const uint32_t ndim = detail::get_u32(is);
        std::vector<int> shape(ndim);
        for (auto& d : shape) d = int(detail::get_u32(is));
        if (shape != node->val.shape)
            throw FormatError("checkpoint: shape mismatch for " + name);
        for (auto& v : node->val.data) {
            uint32_t bits = detail::get_u32(is);
            float f;
            std::memcpy(&f, &bits, 4);
            v = T(f);
        }
    }
}

}  // namespace veil::nn
