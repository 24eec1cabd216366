#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include "dymesh/mesh.hpp"

namespace dymesh {

/// Writes one Wavefront OBJ per frame into `dir` as frame_0000.obj,
/// frame_0001.obj, ... (positions and faces only, 1-based indices).
inline void export_obj_sequence(const DynamicMesh& mesh, const std::string& dir) {
    std::filesystem::create_directories(dir);
    char name[32];
    for (std::size_t t = 0; t < mesh.frames; ++t) {
        std::snprintf(name, sizeof(name), "frame_%04zu.obj", t);
        const std::string path = (std::filesystem::path(dir) / name).string();
        std::ofstream os(path);
        if (!os) throw std::runtime_error("obj export: cannot write " + path);
        const float* fr = mesh.frame(t);
        char line[128];
        for (std::size_t v = 0; v < mesh.vert_count; ++v) {
            std::snprintf(line, sizeof(line), "v %.9g %.9g %.9g\n", fr[v * 3], fr[v * 3 + 1],
                          fr[v * 3 + 2]);
            os << line;
        }
        for (const auto& f : mesh.faces)
            os << "f " << (f[0] + 1) << ' ' << (f[1] + 1) << ' ' << (f[2] + 1) << '\n';
    }
}

}  // namespace dymesh
