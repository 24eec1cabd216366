#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dymesh/mesh.hpp"
#include "dymesh/rng.hpp"
#include "dymesh/vae.hpp"

namespace dymesh {

/// Frame-wise average L2: mean over frames of mean over vertices of the
/// Euclidean distance between corresponding positions.
inline double reconstruction_error(const DynamicMesh& pred, const DynamicMesh& gt) {
    if (pred.frames != gt.frames || pred.vert_count != gt.vert_count)
        throw std::invalid_argument("reconstruction_error: shape mismatch");
    double total = 0;
    for (std::size_t t = 0; t < pred.frames; ++t) {
        const float* a = pred.frame(t);
        const float* b = gt.frame(t);
        double frame_sum = 0;
        for (std::size_t v = 0; v < pred.vert_count; ++v) {
            double d2 = 0;
            for (int c = 0; c < 3; ++c) {
                const double d = double(a[v * 3 + c]) - double(b[v * 3 + c]);
                d2 += d * d;
            }
            frame_sum += std::sqrt(d2);
        }
        total += frame_sum / double(pred.vert_count);
    }
    return total / double(pred.frames);
}

/// Per-instance L2 sum: total Euclidean distance summed over every vertex
/// and frame (the alternative reduction; both are reported, labeled).
inline double l2_sum_error(const DynamicMesh& pred, const DynamicMesh& gt) {
    if (pred.frames != gt.frames || pred.vert_count != gt.vert_count)
        throw std::invalid_argument("l2_sum_error: shape mismatch");
    double total = 0;
    for (std::size_t t = 0; t < pred.frames; ++t) {
        const float* a = pred.frame(t);
        const float* b = gt.frame(t);
        for (std::size_t v = 0; v < pred.vert_count; ++v) {
            double d2 = 0;
            for (int c = 0; c < 3; ++c) {
                const double d = double(a[v * 3 + c]) - double(b[v * 3 + c]);
                d2 += d * d;
            }
            total += std::sqrt(d2);
        }
    }
    return total;
}

struct SweepEntry {
    std::size_t mesh_index = 0;
    double ratio = 0;
    std::size_t tokens = 0;
    double frame_avg_l2 = 0;
    double l2_sum = 0;
    bool skipped = false;
};

struct SweepResult {
    std::vector<SweepEntry> entries;

    std::string to_csv() const {
        std::ostringstream os;
        os << "mesh_index,ratio,tokens,frame_avg_l2,l2_sum,note\n";
        for (const auto& e : entries) {
            os << e.mesh_index << ',' << e.ratio << ',' << e.tokens << ',';
            if (e.skipped)
                os << ",,skipped: ratio*N < 1\n";
            else
                os << e.frame_avg_l2 << ',' << e.l2_sum << ",\n";
        }
        return os.str();
    }
};

inline const std::vector<double>& default_sweep_ratios() {
    static const std::vector<double> r{1.0 / 32, 1.0 / 16, 1.0 / 8, 1.0 / 4};
    return r;
}

/// Reconstructs each mesh at n = ratio*N tokens (posterior mean) and records
/// both error reductions. Entries with ratio*N < 1 are kept but flagged.
template <class T>
SweepResult fps_ratio_sweep(const DyMeshVaeT<T>& model,
                            const std::vector<const DynamicMesh*>& meshes,
                            const std::vector<double>& ratios = default_sweep_ratios()) {
    SweepResult out;
    for (std::size_t mi = 0; mi < meshes.size(); ++mi) {
        const DynamicMesh& gt = *meshes[mi];
        for (double r : ratios) {
            SweepEntry e;
            e.mesh_index = mi;
            e.ratio = r;
            const double nf = r * double(gt.vert_count);
            if (nf < 1.0) {
                e.skipped = true;
                out.entries.push_back(e);
                continue;
            }
            e.tokens = std::size_t(nf);
            const DynamicMesh pred = model.reconstruct(gt, e.tokens);
            e.frame_avg_l2 = reconstruction_error(pred, gt);
            e.l2_sum = l2_sum_error(pred, gt);
            out.entries.push_back(e);
        }
    }
    return out;
}

struct AblationFlags {
    bool use_adj = true;
    bool use_pe0 = true;
    bool use_pet = true;
    bool sep_attn = true;
    bool emb_fps = true;

    std::string label() const {
        if (use_adj && use_pe0 && use_pet && sep_attn && emb_fps) return "full";
        if (!use_adj) return "no-adj";
        if (!use_pe0) return "no-pe0";
        if (!use_pet) return "no-pet";
        if (!sep_attn) return "no-sep-attn";
        return "no-emb-fps";
    }
};

/// The six configurations: all components on, then each toggled off alone.
inline std::vector<AblationFlags> ablation_grid() {
    std::vector<AblationFlags> out;
    out.push_back({});
    out.push_back({.use_adj = false});
    out.push_back({.use_pe0 = false});
    out.push_back({.use_pet = false});
    out.push_back({.sep_attn = false});
    out.push_back({.emb_fps = false});
    return out;
}

struct AblationReport {
    AblationFlags flags;
    double final_train_loss = 0;
    double frame_avg_l2 = 0;
    double l2_sum = 0;
};

/// Trains a fresh small VAE with the given components disabled and reports
/// the posterior-mean reconstruction error on the corpus. Deterministic per
/// (base config, seed).
template <class T>
AblationReport ablation_run(VaeConfig base, const AblationFlags& flags,
                            const std::vector<const DynamicMesh*>& corpus, std::size_t steps,
                            std::uint64_t seed) {
    base.use_adj = flags.use_adj;
    base.use_pe0 = flags.use_pe0;
    base.use_pet = flags.use_pet;
    base.sep_attn = flags.sep_attn;
    base.emb_fps = flags.emb_fps;
    base.validate();

    DyMeshVaeT<T> model(base, seed);
    AdamT<T> opt(model.params(), T(base.learning_rate));
    Rng noise(seed);
    Rng order = noise.stream("ablation-order");

    AblationReport rep;
    rep.flags = flags;
    for (std::size_t s = 0; s < steps; ++s) {
        std::vector<const DynamicMesh*> batch{corpus[order.below(corpus.size())]};
        rep.final_train_loss = model.train_step(batch, opt, noise).total;
    }
    double sum_avg = 0, sum_sum = 0;
    for (const DynamicMesh* m : corpus) {
        const std::size_t n = std::min<std::size_t>(base.tokens, m->vert_count);
        const DynamicMesh pred = model.reconstruct(*m, n);
        sum_avg += reconstruction_error(pred, *m);
        sum_sum += l2_sum_error(pred, *m);
    }
    rep.frame_avg_l2 = sum_avg / double(corpus.size());
    rep.l2_sum = sum_sum / double(corpus.size());
    return rep;
}

}  // namespace dymesh
