#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dymesh/graph.hpp"
#include "dymesh/tensor.hpp"

namespace dymesh {

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Parameter checkpoint container, little-endian:
///   magic "DYCK" | u16 version | u32 entry count
///   per entry: u32 name length | name bytes | u32 ndim | u64 dims... | f32 data
/// Round trips are bit-exact for float parameters.
namespace ckpt {

inline constexpr char kMagic[4] = {'D', 'Y', 'C', 'K'};
inline constexpr std::uint16_t kVersion = 1;

template <class V>
void write_pod(std::ostream& os, V v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <class V>
V read_pod(std::istream& is) {
    V v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw CheckpointError("checkpoint: truncated file");
    return v;
}

template <class T>
void save(const std::string& path, const std::vector<ParameterT<T>*>& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw CheckpointError("checkpoint: cannot open for write: " + path);
    os.write(kMagic, 4);
    write_pod(os, kVersion);
    write_pod(os, std::uint32_t(params.size()));
    for (const auto* p : params) {
        write_pod(os, std::uint32_t(p->name.size()));
        os.write(p->name.data(), std::streamsize(p->name.size()));
        write_pod(os, std::uint32_t(p->value.shape.size()));
        for (auto d : p->value.shape) write_pod(os, std::uint64_t(d));
        for (T v : p->value.data) write_pod(os, float(v));
    }
    if (!os) throw CheckpointError("checkpoint: write failed: " + path);
}

template <class T>
void load(const std::string& path, const std::vector<ParameterT<T>*>& params) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("checkpoint: cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw CheckpointError("checkpoint: bad magic");
    if (read_pod<std::uint16_t>(is) != kVersion)
        throw CheckpointError("checkpoint: unsupported version");
    const auto count = read_pod<std::uint32_t>(is);
    if (count != params.size())
        throw CheckpointError("checkpoint: entry count does not match model");
    for (auto* p : params) {
        const auto name_len = read_pod<std::uint32_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw CheckpointError("checkpoint: truncated name");
        if (name != p->name)
            throw CheckpointError("checkpoint: parameter name mismatch: expected " + p->name +
                                  ", found " + name);
        const auto ndim = read_pod<std::uint32_t>(is);
        std::vector<std::size_t> shape(ndim);
        for (auto& d : shape) d = std::size_t(read_pod<std::uint64_t>(is));
        if (shape != p->value.shape) throw CheckpointError("checkpoint: shape mismatch for " + name);
        for (auto& v : p->value.data) v = T(read_pod<float>(is));
    }
}

}  // namespace ckpt

/// FNV-1a content hash of a file, hex encoded; used in run manifests.
inline std::string file_content_hash(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("hash: cannot open: " + path);
    std::uint64_t h = 1469598103934665603ull;
    char buf[65536];
    while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
        for (std::streamsize i = 0; i < is.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
        if (!is) break;
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
    return std::string(out);
}

}  // namespace dymesh
