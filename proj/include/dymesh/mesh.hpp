#pragma once

#include <array>
#include <cmath>
#include <cstring>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace dymesh {

struct MeshError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Fixed-topology triangle mesh whose vertex positions vary over `frames`
/// frames. Vertices are stored frame-major: position of vertex v at frame t
/// lives at vertices[(t * vert_count + v) * 3 + {0,1,2}].
struct DynamicMesh {
    std::vector<std::array<std::uint32_t, 3>> faces;
    std::vector<float> vertices;
    std::size_t frames = 0;
    std::size_t vert_count = 0;
    std::optional<std::string> caption;

    std::size_t face_count() const { return faces.size(); }

    const float* frame(std::size_t t) const { return vertices.data() + t * vert_count * 3; }
    float* frame(std::size_t t) { return vertices.data() + t * vert_count * 3; }

    const float* pos(std::size_t t, std::size_t v) const {
        return vertices.data() + (t * vert_count + v) * 3;
    }
    float* pos(std::size_t t, std::size_t v) {
        return vertices.data() + (t * vert_count + v) * 3;
    }
};

inline void validate_mesh(const DynamicMesh& m) {
    if (m.frames < 1) throw MeshError("mesh: needs at least one frame");
    if (m.vert_count < 3) throw MeshError("mesh: needs at least three vertices");
    if (m.faces.empty()) throw MeshError("mesh: needs at least one face");
    if (m.vertices.size() != m.frames * m.vert_count * 3)
        throw MeshError("mesh: vertex buffer size mismatch");
    for (const auto& f : m.faces) {
        for (auto idx : f)
            if (idx >= m.vert_count) throw MeshError("mesh: face index out of range");
        if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
            throw MeshError("mesh: degenerate face");
    }
    for (float v : m.vertices)
        if (!std::isfinite(v)) throw MeshError("mesh: non-finite coordinate");
}

/// Initial-frame positions plus per-frame offsets relative to frame 0.
/// recompose(decompose(m)) reproduces m up to floating-point addition.
struct TrajectoryDecomposition {
    std::vector<float> v0;  // N*3
    std::vector<float> vt;  // T*N*3, frame 0 all-zero
    std::size_t frames = 0;
    std::size_t vert_count = 0;
};

inline TrajectoryDecomposition decompose(const DynamicMesh& m) {
    validate_mesh(m);
    TrajectoryDecomposition d;
    d.frames = m.frames;
    d.vert_count = m.vert_count;
    d.v0.assign(m.frame(0), m.frame(0) + m.vert_count * 3);
    d.vt.resize(m.frames * m.vert_count * 3);
    for (std::size_t t = 0; t < m.frames; ++t) {
        const float* src = m.frame(t);
        float* dst = d.vt.data() + t * m.vert_count * 3;
        for (std::size_t i = 0; i < m.vert_count * 3; ++i) dst[i] = src[i] - d.v0[i];
    }
    return d;
}

inline std::vector<float> recompose(const TrajectoryDecomposition& d) {
    if (d.v0.size() != d.vert_count * 3 || d.vt.size() != d.frames * d.vert_count * 3)
        throw MeshError("recompose: shape mismatch");
    std::vector<float> out(d.vt.size());
    for (std::size_t t = 0; t < d.frames; ++t) {
        const float* src = d.vt.data() + t * d.vert_count * 3;
        float* dst = out.data() + t * d.vert_count * 3;
        for (std::size_t i = 0; i < d.vert_count * 3; ++i) dst[i] = d.v0[i] + src[i];
    }
    return out;
}

/// Symmetric vertex-connectivity predicate derived from faces, including the
/// diagonal; bit rows so it can be applied directly as an attention mask.
class AdjacencyMask {
  public:
    AdjacencyMask() = default;
    AdjacencyMask(std::size_t n, const std::vector<std::array<std::uint32_t, 3>>& faces)
        : n_(n), words_per_row_((n + 63) / 64), bits_(n * words_per_row_, 0) {
        for (std::size_t i = 0; i < n; ++i) set(i, i);
        for (const auto& f : faces) {
            for (auto idx : f)
                if (idx >= n) throw MeshError("adjacency: face index out of range");
            link(f[0], f[1]);
            link(f[1], f[2]);
            link(f[0], f[2]);
        }
    }

    std::size_t size() const { return n_; }

    bool adj(std::size_t i, std::size_t j) const {
        return (bits_[i * words_per_row_ + j / 64] >> (j % 64)) & 1u;
    }

    const std::uint64_t* row(std::size_t i) const { return bits_.data() + i * words_per_row_; }
    std::size_t words_per_row() const { return words_per_row_; }

  private:
    void set(std::size_t i, std::size_t j) {
        bits_[i * words_per_row_ + j / 64] |= std::uint64_t(1) << (j % 64);
    }
    void link(std::size_t i, std::size_t j) {
        set(i, j);
        set(j, i);
    }

    std::size_t n_ = 0;
    std::size_t words_per_row_ = 0;
    std::vector<std::uint64_t> bits_;
};

inline AdjacencyMask build_adjacency(const std::vector<std::array<std::uint32_t, 3>>& faces,
                                     std::size_t n) {
    return AdjacencyMask(n, faces);
}

/// Collapses vertices whose frame-0 positions coincide within tol in every
/// coordinate; trajectories of merged duplicates are those of the canonical
/// (lowest-index) duplicate. Degenerate and duplicate faces are dropped.
inline DynamicMesh merge_duplicate_vertices(const DynamicMesh& mesh, float tol = 0.0f) {
    validate_mesh(mesh);
    const std::size_t n = mesh.vert_count;
    std::vector<std::uint32_t> canon(n);
    const float* f0 = mesh.frame(0);

    if (tol == 0.0f) {
        struct KeyHash {
            std::size_t operator()(const std::array<float, 3>& k) const {
                std::size_t h = 1469598103934665603ull;
                for (float v : k) {
                    std::uint32_t bits;
                    static_assert(sizeof(bits) == sizeof(v));
                    std::memcpy(&bits, &v, sizeof(bits));
                    h = (h ^ bits) * 1099511628211ull;
                }
                return h;
            }
        };
        std::unordered_map<std::array<float, 3>, std::uint32_t, KeyHash> seen;
        for (std::size_t i = 0; i < n; ++i) {
            std::array<float, 3> key = {f0[3 * i], f0[3 * i + 1], f0[3 * i + 2]};
            canon[i] = seen.emplace(key, std::uint32_t(i)).first->second;
        }
    } else {
        // Small-corpus path: pairwise comparison against earlier canonicals.
        for (std::size_t i = 0; i < n; ++i) {
            canon[i] = std::uint32_t(i);
            for (std::size_t j = 0; j < i; ++j) {
                if (canon[j] != j) continue;
                bool close = true;
                for (int c = 0; c < 3 && close; ++c)
                    close = std::abs(f0[3 * i + c] - f0[3 * j + c]) <= tol;
                if (close) {
                    canon[i] = std::uint32_t(j);
                    break;
                }
            }
        }
    }

    std::vector<std::uint32_t> remap(n, std::numeric_limits<std::uint32_t>::max());
    std::uint32_t kept = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (canon[i] == i) remap[i] = kept++;
    for (std::size_t i = 0; i < n; ++i) remap[i] = remap[canon[i]];

    DynamicMesh out;
    out.frames = mesh.frames;
    out.vert_count = kept;
    out.caption = mesh.caption;
    out.vertices.resize(mesh.frames * kept * 3);
    for (std::size_t i = 0; i < n; ++i) {
        if (canon[i] != i) continue;
        const std::uint32_t ni = remap[i];
        for (std::size_t t = 0; t < mesh.frames; ++t) {
            const float* src = mesh.pos(t, i);
            float* dst = out.vertices.data() + (t * kept + ni) * 3;
            dst[0] = src[0];
            dst[1] = src[1];
            dst[2] = src[2];
        }
    }

    struct FaceHash {
        std::size_t operator()(const std::array<std::uint32_t, 3>& f) const {
            return (std::size_t(f[0]) * 73856093u) ^ (std::size_t(f[1]) * 19349663u) ^
                   (std::size_t(f[2]) * 83492791u);
        }
    };
    std::unordered_map<std::array<std::uint32_t, 3>, bool, FaceHash> face_seen;
    for (const auto& f : mesh.faces) {
        std::array<std::uint32_t, 3> nf = {remap[f[0]], remap[f[1]], remap[f[2]]};
        if (nf[0] == nf[1] || nf[1] == nf[2] || nf[0] == nf[2]) continue;
        if (face_seen.emplace(nf, true).second) out.faces.push_back(nf);
    }
    if (out.faces.empty()) throw MeshError("merge: all faces degenerate after merging");
    return out;
}

struct FpsSelection {
    std::vector<std::uint32_t> indices;
    std::uint32_t seed_index = 0;
};

/// Greedy max-min farthest point sampling in feature space. Deterministic:
/// each step picks the point maximizing the minimum squared distance to the
/// selected set, ties broken by lowest index. Sequential by definition.
template <class T>
FpsSelection farthest_point_sampling(const T* features, std::size_t n_points, std::size_t dim,
                                     std::size_t n_samples, std::uint32_t seed_index = 0) {
    if (n_samples < 1 || n_samples > n_points)
        throw std::invalid_argument("fps: sample count out of range");
    if (seed_index >= n_points) throw std::invalid_argument("fps: seed index out of range");

    FpsSelection sel;
    sel.seed_index = seed_index;
    sel.indices.reserve(n_samples);
    sel.indices.push_back(seed_index);

    std::vector<T> min_d2(n_points, std::numeric_limits<T>::max());
    min_d2[seed_index] = T(-1);
    std::uint32_t last = seed_index;
    for (std::size_t step = 1; step < n_samples; ++step) {
        const T* lastf = features + std::size_t(last) * dim;
        std::uint32_t best = 0;
        T best_d2 = T(-1);
        for (std::size_t i = 0; i < n_points; ++i) {
            const T* fi = features + i * dim;
            T d2 = 0;
            for (std::size_t c = 0; c < dim; ++c) {
                const T diff = fi[c] - lastf[c];
                d2 += diff * diff;
            }
            if (d2 < min_d2[i]) min_d2[i] = d2;
            if (min_d2[i] > best_d2) {
                best_d2 = min_d2[i];
                best = std::uint32_t(i);
            }
        }
        min_d2[best] = T(-1);  // already selected; never picked again
        sel.indices.push_back(best);
        last = best;
    }
    return sel;
}

}  // namespace dymesh
