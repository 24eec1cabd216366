#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dymesh/mesh.hpp"
#include "dymesh/rng.hpp"

namespace dymesh {
namespace synth {

inline constexpr double kPi = 3.14159265358979323846;

/// UV sphere whose radius pulses sinusoidally over time.
inline DynamicMesh oscillating_sphere(std::size_t rings = 8, std::size_t segments = 10,
                                      std::size_t frames = 16, double amplitude = 0.25,
                                      double phase = 0.0) {
    if (rings < 3 || segments < 3) throw std::invalid_argument("sphere: resolution too low");
    DynamicMesh m;
    m.frames = frames;
    // Poles plus interior rings.
    const std::size_t n = (rings - 1) * segments + 2;
    m.vert_count = n;
    m.vertices.resize(frames * n * 3);
    std::vector<float> base(n * 3);
    base[0] = 0;
    base[1] = 1;
    base[2] = 0;
    std::size_t vi = 1;
    for (std::size_t r = 1; r < rings; ++r) {
        const double theta = kPi * double(r) / double(rings);
        for (std::size_t s = 0; s < segments; ++s, ++vi) {
            const double phi = 2.0 * kPi * double(s) / double(segments);
            base[vi * 3] = float(std::sin(theta) * std::cos(phi));
            base[vi * 3 + 1] = float(std::cos(theta));
            base[vi * 3 + 2] = float(std::sin(theta) * std::sin(phi));
        }
    }
    base[vi * 3] = 0;
    base[vi * 3 + 1] = -1;
    base[vi * 3 + 2] = 0;

    for (std::size_t t = 0; t < frames; ++t) {
        const double scale = 1.0 + amplitude * std::sin(2.0 * kPi * double(t) / frames + phase);
        float* fr = m.frame(t);
        for (std::size_t i = 0; i < n * 3; ++i) fr[i] = float(base[i] * scale);
    }

    auto ring_vert = [&](std::size_t r, std::size_t s) {
        return std::uint32_t(1 + (r - 1) * segments + (s % segments));
    };
    for (std::size_t s = 0; s < segments; ++s)
        m.faces.push_back({0, ring_vert(1, s + 1), ring_vert(1, s)});
    for (std::size_t r = 1; r + 1 < rings; ++r)
        for (std::size_t s = 0; s < segments; ++s) {
            m.faces.push_back({ring_vert(r, s), ring_vert(r, s + 1), ring_vert(r + 1, s)});
            m.faces.push_back({ring_vert(r, s + 1), ring_vert(r + 1, s + 1), ring_vert(r + 1, s)});
        }
    const std::uint32_t south = std::uint32_t(n - 1);
    for (std::size_t s = 0; s < segments; ++s)
        m.faces.push_back({ring_vert(rings - 1, s), ring_vert(rings - 1, s + 1), south});
    return m;
}

/// Rectangular cloth grid with a traveling sine wave along x.
inline DynamicMesh waving_grid(std::size_t nx = 12, std::size_t ny = 10, std::size_t frames = 16,
                               double amplitude = 0.3, double wavelength = 1.0) {
    if (nx < 2 || ny < 2) throw std::invalid_argument("grid: resolution too low");
    DynamicMesh m;
    m.frames = frames;
    m.vert_count = nx * ny;
    m.vertices.resize(frames * m.vert_count * 3);
    for (std::size_t t = 0; t < frames; ++t) {
        const double tt = double(t) / frames;
        float* fr = m.frame(t);
        for (std::size_t y = 0; y < ny; ++y)
            for (std::size_t x = 0; x < nx; ++x) {
                const double px = 2.0 * double(x) / (nx - 1) - 1.0;
                const double py = 2.0 * double(y) / (ny - 1) - 1.0;
                const double pz =
                    amplitude * std::sin(2.0 * kPi * (px / wavelength - tt)) * (0.5 + 0.5 * py);
                float* v = fr + (y * nx + x) * 3;
                v[0] = float(px);
                v[1] = float(py);
                v[2] = float(pz);
            }
    }
    for (std::size_t y = 0; y + 1 < ny; ++y)
        for (std::size_t x = 0; x + 1 < nx; ++x) {
            const auto a = std::uint32_t(y * nx + x);
            const auto b = std::uint32_t(y * nx + x + 1);
            const auto c = std::uint32_t((y + 1) * nx + x);
            const auto d = std::uint32_t((y + 1) * nx + x + 1);
            m.faces.push_back({a, b, c});
            m.faces.push_back({b, d, c});
        }
    return m;
}

/// Open cylinder that twists about its axis, with twist growing along y.
inline DynamicMesh twisting_cylinder(std::size_t segments = 10, std::size_t layers = 8,
                                     std::size_t frames = 16, double max_twist = 1.2) {
    if (segments < 3 || layers < 2) throw std::invalid_argument("cylinder: resolution too low");
    DynamicMesh m;
    m.frames = frames;
    m.vert_count = segments * layers;
    m.vertices.resize(frames * m.vert_count * 3);
    for (std::size_t t = 0; t < frames; ++t) {
        const double twist = max_twist * std::sin(2.0 * kPi * double(t) / frames);
        float* fr = m.frame(t);
        for (std::size_t l = 0; l < layers; ++l) {
            const double y = 2.0 * double(l) / (layers - 1) - 1.0;
            const double local = twist * (y + 1.0) / 2.0;
            for (std::size_t s = 0; s < segments; ++s) {
                const double phi = 2.0 * kPi * double(s) / segments + local;
                float* v = fr + (l * segments + s) * 3;
                v[0] = float(0.5 * std::cos(phi));
                v[1] = float(y);
                v[2] = float(0.5 * std::sin(phi));
            }
        }
    }
    for (std::size_t l = 0; l + 1 < layers; ++l)
        for (std::size_t s = 0; s < segments; ++s) {
            const auto a = std::uint32_t(l * segments + s);
            const auto b = std::uint32_t(l * segments + (s + 1) % segments);
            const auto c = std::uint32_t((l + 1) * segments + s);
            const auto d = std::uint32_t((l + 1) * segments + (s + 1) % segments);
            m.faces.push_back({a, b, c});
            m.faces.push_back({b, d, c});
        }
    return m;
}

/// Two spatially close but disconnected components with opposing motions;
/// exercises topology-aware attention (nearby vertices, different parts).
inline DynamicMesh articulated_pair(std::size_t grid = 5, std::size_t frames = 16,
                                    double amplitude = 0.3) {
    DynamicMesh m;
    m.frames = frames;
    const std::size_t per = grid * grid;
    m.vert_count = 2 * per;
    m.vertices.resize(frames * m.vert_count * 3);
    for (std::size_t t = 0; t < frames; ++t) {
        const double s = amplitude * std::sin(2.0 * kPi * double(t) / frames);
        float* fr = m.frame(t);
        for (std::size_t comp = 0; comp < 2; ++comp) {
            const double dir = comp == 0 ? 1.0 : -1.0;
            for (std::size_t y = 0; y < grid; ++y)
                for (std::size_t x = 0; x < grid; ++x) {
                    float* v = fr + ((comp * per) + y * grid + x) * 3;
                    v[0] = float(double(x) / (grid - 1) - 0.5);
                    v[1] = float(double(y) / (grid - 1) - 0.5 + dir * s);
                    // Components sit almost in the same plane: only faces
                    // tell them apart.
                    v[2] = float(comp == 0 ? 0.02 : -0.02);
                }
        }
    }
    auto add_grid_faces = [&](std::uint32_t base) {
        for (std::size_t y = 0; y + 1 < grid; ++y)
            for (std::size_t x = 0; x + 1 < grid; ++x) {
                const auto a = base + std::uint32_t(y * grid + x);
                const auto b = base + std::uint32_t(y * grid + x + 1);
                const auto c = base + std::uint32_t((y + 1) * grid + x);
                const auto d = base + std::uint32_t((y + 1) * grid + x + 1);
                m.faces.push_back({a, b, c});
                m.faces.push_back({b, d, c});
            }
    };
    add_grid_faces(0);
    add_grid_faces(std::uint32_t(per));
    return m;
}

/// Random valid mesh for property tests: vertices drawn uniformly, faces
/// drawn as random distinct index triples, small random per-frame motion.
inline DynamicMesh random_mesh(Rng& rng, std::size_t n_verts = 20, std::size_t n_faces = 30,
                               std::size_t frames = 4, double motion = 0.1) {
    DynamicMesh m;
    m.frames = frames;
    m.vert_count = n_verts;
    m.vertices.resize(frames * n_verts * 3);
    float* f0 = m.frame(0);
    for (std::size_t i = 0; i < n_verts * 3; ++i) f0[i] = float(rng.uniform(-1.0, 1.0));
    for (std::size_t t = 1; t < frames; ++t) {
        float* fr = m.frame(t);
        for (std::size_t i = 0; i < n_verts * 3; ++i)
            fr[i] = f0[i] + float(motion * rng.uniform(-1.0, 1.0));
    }
    while (m.faces.size() < n_faces) {
        std::uint32_t a = std::uint32_t(rng.below(n_verts));
        std::uint32_t b = std::uint32_t(rng.below(n_verts));
        std::uint32_t c = std::uint32_t(rng.below(n_verts));
        if (a == b || b == c || a == c) continue;
        m.faces.push_back({a, b, c});
    }
    return m;
}

/// Named generator dispatch used by the dataset-build CLI spec strings.
inline DynamicMesh generate(const std::string& name, std::size_t frames, std::size_t variant) {
    const double phase = 0.4 * double(variant);
    if (name == "oscillating-sphere")
        return oscillating_sphere(8, 10 + variant % 3, frames, 0.2 + 0.03 * double(variant % 4),
                                  phase);
    if (name == "waving-grid")
        return waving_grid(10 + variant % 4, 8 + variant % 3, frames,
                           0.25 + 0.02 * double(variant % 5), 1.0 + 0.1 * double(variant % 3));
    if (name == "twisting-cylinder")
        return twisting_cylinder(8 + variant % 4, 8, frames, 0.8 + 0.1 * double(variant % 4));
    if (name == "articulated-pair")
        return articulated_pair(5 + variant % 3, frames, 0.2 + 0.03 * double(variant % 4));
    throw std::invalid_argument("unknown synthetic generator: " + name);
}

}  // namespace synth
}  // namespace dymesh
