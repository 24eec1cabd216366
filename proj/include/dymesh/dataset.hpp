#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dymesh/mesh.hpp"

namespace dymesh {

// ---------------------------------------------------------------------------
// .dmb binary codec
// ---------------------------------------------------------------------------

enum class DmbStatus {
    Ok,
    BadMagic,
    BadVersion,
    Truncated,
    IndexOutOfRange,
    BadShape,
    IoError,
};

inline const char* dmb_status_name(DmbStatus s) {
    switch (s) {
        case DmbStatus::Ok: return "ok";
        case DmbStatus::BadMagic: return "bad-magic";
        case DmbStatus::BadVersion: return "bad-version";
        case DmbStatus::Truncated: return "truncated";
        case DmbStatus::IndexOutOfRange: return "index-out-of-range";
        case DmbStatus::BadShape: return "bad-shape";
        case DmbStatus::IoError: return "io-error";
    }
    return "unknown";
}

struct DmbError : std::runtime_error {
    DmbStatus status;
    DmbError(DmbStatus s, const std::string& msg)
        : std::runtime_error(msg + " (" + dmb_status_name(s) + ")"), status(s) {}
};

/// Dynamic mesh container, little-endian:
///   magic "DYM1" | u16 version | u32 M | u32 N | u32 T
///   faces M*3 u32 | vertices T*N*3 f32
///   u8 caption flag | (u32 caption length | caption UTF-8) when flag is 1
namespace dmb {

inline constexpr char kMagic[4] = {'D', 'Y', 'M', '1'};
inline constexpr std::uint16_t kVersion = 1;

// Shape limits for validating untrusted headers before allocating.
inline constexpr std::uint64_t kMaxFaces = 50'000'000;
inline constexpr std::uint64_t kMaxVerts = 20'000'000;
inline constexpr std::uint64_t kMaxFrames = 100'000;

template <class V>
void put(std::ostream& os, V v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <class V>
V pull(std::istream& is) {
    V v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw DmbError(DmbStatus::Truncated, "dmb: truncated while reading");
    return v;
}

}  // namespace dmb

inline void dmb_write(const std::string& path, const DynamicMesh& mesh) {
    validate_mesh(mesh);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DmbError(DmbStatus::IoError, "dmb: cannot open for write: " + path);
    os.write(dmb::kMagic, 4);
    dmb::put(os, dmb::kVersion);
    dmb::put(os, std::uint32_t(mesh.face_count()));
    dmb::put(os, std::uint32_t(mesh.vert_count));
    dmb::put(os, std::uint32_t(mesh.frames));
    for (const auto& f : mesh.faces)
        for (auto idx : f) dmb::put(os, idx);
    os.write(reinterpret_cast<const char*>(mesh.vertices.data()),
             std::streamsize(mesh.vertices.size() * sizeof(float)));
    dmb::put(os, std::uint8_t(mesh.caption ? 1 : 0));
    if (mesh.caption) {
        dmb::put(os, std::uint32_t(mesh.caption->size()));
        os.write(mesh.caption->data(), std::streamsize(mesh.caption->size()));
    }
    if (!os) throw DmbError(DmbStatus::IoError, "dmb: write failed: " + path);
}

inline DynamicMesh dmb_read(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DmbError(DmbStatus::IoError, "dmb: cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, dmb::kMagic, 4) != 0)
        throw DmbError(DmbStatus::BadMagic, "dmb: bad magic in " + path);
    if (dmb::pull<std::uint16_t>(is) != dmb::kVersion)
        throw DmbError(DmbStatus::BadVersion, "dmb: unsupported version in " + path);
    const auto m = dmb::pull<std::uint32_t>(is);
    const auto n = dmb::pull<std::uint32_t>(is);
    const auto t = dmb::pull<std::uint32_t>(is);
    if (m < 1 || n < 3 || t < 1 || m > dmb::kMaxFaces || n > dmb::kMaxVerts ||
        t > dmb::kMaxFrames)
        throw DmbError(DmbStatus::BadShape, "dmb: implausible shape in header of " + path);

    // Cross-check the implied payload against the actual file size before
    // allocating anything; headers are untrusted.
    const std::streamoff payload_start = is.tellg();
    is.seekg(0, std::ios::end);
    const std::streamoff file_end = is.tellg();
    is.seekg(payload_start);
    const std::uint64_t needed = std::uint64_t(m) * 12 + std::uint64_t(t) * n * 12 + 1;
    if (file_end < payload_start ||
        std::uint64_t(file_end - payload_start) < needed)
        throw DmbError(DmbStatus::Truncated, "dmb: payload shorter than header implies in " + path);

    DynamicMesh mesh;
    mesh.frames = t;
    mesh.vert_count = n;
    mesh.faces.resize(m);
    for (auto& f : mesh.faces) {
        for (auto& idx : f) {
            idx = dmb::pull<std::uint32_t>(is);
            if (idx >= n)
                throw DmbError(DmbStatus::IndexOutOfRange, "dmb: face index out of range in " + path);
        }
    }
    mesh.vertices.resize(std::size_t(t) * n * 3);
    is.read(reinterpret_cast<char*>(mesh.vertices.data()),
            std::streamsize(mesh.vertices.size() * sizeof(float)));
    if (!is) throw DmbError(DmbStatus::Truncated, "dmb: truncated vertex payload in " + path);
    const auto has_caption = dmb::pull<std::uint8_t>(is);
    if (has_caption) {
        const auto len = dmb::pull<std::uint32_t>(is);
        if (len > (1u << 20))
            throw DmbError(DmbStatus::BadShape, "dmb: implausible caption length in " + path);
        std::string caption(len, '\0');
        is.read(caption.data(), len);
        if (!is) throw DmbError(DmbStatus::Truncated, "dmb: truncated caption in " + path);
        mesh.caption = std::move(caption);
    }
    return mesh;
}

// ---------------------------------------------------------------------------
// Slicing, normalization, filtering
// ---------------------------------------------------------------------------

/// Non-overlapping windows from offset 0 and, independently, offset
/// window/2; every emitted window is also emitted frame-reversed. Trailing
/// remainders are dropped; T < window yields no output.
inline std::vector<DynamicMesh> slice_windows(const DynamicMesh& animation, std::size_t window) {
    std::vector<DynamicMesh> out;
    if (animation.frames < window) return out;
    auto emit = [&](std::size_t start) {
        DynamicMesh w;
        w.faces = animation.faces;
        w.frames = window;
        w.vert_count = animation.vert_count;
        w.caption = animation.caption;
        w.vertices.assign(animation.frame(start),
                          animation.frame(start) + window * animation.vert_count * 3);
        DynamicMesh rev = w;
        for (std::size_t t = 0; t < window; ++t)
            std::copy_n(w.frame(window - 1 - t), animation.vert_count * 3, rev.frame(t));
        out.push_back(std::move(w));
        out.push_back(std::move(rev));
    };
    for (std::size_t start = 0; start + window <= animation.frames; start += window) emit(start);
    for (std::size_t start = window / 2; start + window <= animation.frames; start += window)
        emit(start);
    return out;
}

/// Centers all frames on the frame-0 bounding-box center, then scales all
/// frames by the frame-0 max absolute coordinate. Frame 0 lands in [-1, 1]
/// with at least one coordinate at +-1; later frames may exceed the box.
inline DynamicMesh normalize_window(const DynamicMesh& mesh) {
    validate_mesh(mesh);
    const float* f0 = mesh.frame(0);
    float lo[3], hi[3];
    for (int c = 0; c < 3; ++c) lo[c] = hi[c] = f0[c];
    for (std::size_t i = 1; i < mesh.vert_count; ++i)
        for (int c = 0; c < 3; ++c) {
            lo[c] = std::min(lo[c], f0[i * 3 + c]);
            hi[c] = std::max(hi[c], f0[i * 3 + c]);
        }
    const float center[3] = {(lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2, (lo[2] + hi[2]) / 2};
    float max_abs = 0;
    for (std::size_t i = 0; i < mesh.vert_count; ++i)
        for (int c = 0; c < 3; ++c)
            max_abs = std::max(max_abs, std::abs(f0[i * 3 + c] - center[c]));
    if (max_abs == 0) throw MeshError("normalize: frame 0 has zero extent");

    DynamicMesh out = mesh;
    const float inv = 1.0f / max_abs;
    for (std::size_t t = 0; t < mesh.frames; ++t) {
        float* fr = out.frame(t);
        for (std::size_t i = 0; i < mesh.vert_count; ++i)
            for (int c = 0; c < 3; ++c) fr[i * 3 + c] = (fr[i * 3 + c] - center[c]) * inv;
    }
    return out;
}

struct FilterResult {
    bool keep = true;
    std::string reason;
};

/// Keep iff the max over consecutive frame pairs of the max-abs coordinate
/// difference lies in [0.01, 0.5] (closed interval).
inline FilterResult motion_filter(const DynamicMesh& mesh) {
    float m = 0;
    for (std::size_t t = 0; t + 1 < mesh.frames; ++t) {
        const float* a = mesh.frame(t);
        const float* b = mesh.frame(t + 1);
        for (std::size_t i = 0; i < mesh.vert_count * 3; ++i)
            m = std::max(m, std::abs(a[i] - b[i]));
    }
    if (m < 0.01f) return {false, "motion-too-small"};
    if (m > 0.5f) return {false, "motion-too-large"};
    return {true, ""};
}

/// Keep iff faces/vertices <= 2.5 (boundary kept; only strictly exceeding
/// ratios are rejected).
inline FilterResult ratio_filter(const DynamicMesh& mesh) {
    const double ratio = double(mesh.face_count()) / double(mesh.vert_count);
    if (ratio > 2.5) return {false, "face-vertex-ratio"};
    return {true, ""};
}

// ---------------------------------------------------------------------------
// Padded batching
// ---------------------------------------------------------------------------

/// Batch with uniform tensor extents: vertices padded with (0,0,0) rows up
/// to the max vertex count, faces padded with (-1,-1,-1) rows up to
/// ceil(2.5 * Nmax).
struct PaddedBatch {
    std::vector<float> vertices;        // B * T * Nmax * 3
    std::vector<std::int64_t> faces;    // B * Mmax * 3, padded rows are -1
    std::vector<std::size_t> valid_vertex_count;
    std::vector<std::size_t> valid_face_count;
    std::size_t batch = 0, frames = 0, max_verts = 0, max_faces = 0;

    const float* item_vertices(std::size_t b) const {
        return vertices.data() + b * frames * max_verts * 3;
    }
    const std::int64_t* item_faces(std::size_t b) const {
        return faces.data() + b * max_faces * 3;
    }
};

inline PaddedBatch pad_batch(const std::vector<DynamicMesh>& items) {
    if (items.empty()) throw std::invalid_argument("pad_batch: empty batch");
    PaddedBatch out;
    out.batch = items.size();
    out.frames = items[0].frames;
    for (const auto& m : items) {
        validate_mesh(m);
        if (m.frames != out.frames) throw std::invalid_argument("pad_batch: non-uniform T");
        out.max_verts = std::max(out.max_verts, m.vert_count);
    }
    out.max_faces = std::size_t(std::ceil(2.5 * double(out.max_verts)));
    for (const auto& m : items)
        if (m.face_count() > out.max_faces)
            throw std::invalid_argument("pad_batch: face count exceeds 2.5 * max vertex count");

    out.vertices.assign(out.batch * out.frames * out.max_verts * 3, 0.0f);
    out.faces.assign(out.batch * out.max_faces * 3, -1);
    for (std::size_t b = 0; b < items.size(); ++b) {
        const auto& m = items[b];
        out.valid_vertex_count.push_back(m.vert_count);
        out.valid_face_count.push_back(m.face_count());
        for (std::size_t t = 0; t < out.frames; ++t)
            std::copy_n(m.frame(t), m.vert_count * 3,
                        out.vertices.data() + ((b * out.frames + t) * out.max_verts) * 3);
        for (std::size_t f = 0; f < m.face_count(); ++f)
            for (int c = 0; c < 3; ++c)
                out.faces[(b * out.max_faces + f) * 3 + c] = std::int64_t(m.faces[f][c]);
    }
    return out;
}

/// Strips padding for one item; negative face rows are skipped, so adjacency
/// construction downstream never sees them.
inline DynamicMesh unpad_item(const PaddedBatch& batch, std::size_t b) {
    if (b >= batch.batch) throw std::out_of_range("unpad_item: index out of range");
    DynamicMesh m;
    m.frames = batch.frames;
    m.vert_count = batch.valid_vertex_count[b];
    m.vertices.resize(batch.frames * m.vert_count * 3);
    for (std::size_t t = 0; t < batch.frames; ++t)
        std::copy_n(batch.item_vertices(b) + t * batch.max_verts * 3, m.vert_count * 3,
                    m.vertices.data() + t * m.vert_count * 3);
    const std::int64_t* faces = batch.item_faces(b);
    for (std::size_t f = 0; f < batch.max_faces; ++f) {
        if (faces[f * 3] < 0) continue;
        m.faces.push_back({std::uint32_t(faces[f * 3]), std::uint32_t(faces[f * 3 + 1]),
                           std::uint32_t(faces[f * 3 + 2])});
    }
    return m;
}

}  // namespace dymesh
