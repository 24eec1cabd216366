// Acceptance suite: one pass/fail line per criterion, fixed tolerances.
// Exit status is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "dymesh/checkpoint.hpp"
#include "dymesh/config_json.hpp"
#include "dymesh/dataset.hpp"
#include "dymesh/eval.hpp"
#include "dymesh/flow.hpp"
#include "dymesh/mesh.hpp"
#include "dymesh/rng.hpp"
#include "dymesh/synth.hpp"
#include "dymesh/text_embed.hpp"
#include "dymesh/vae.hpp"

#ifndef DYMESH_CLI_PATH
#error "DYMESH_CLI_PATH must point at the built command-line binary"
#endif

using namespace dymesh;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

#define ACK(cond)                                                                    \
    do {                                                                             \
        if (!(cond))                                                                 \
            throw std::runtime_error(std::string("check failed at line ") +          \
                                     std::to_string(__LINE__) + ": " #cond);         \
    } while (0)

template <class F>
void criterion(int num, const char* name, double budget_s, F&& body) {
    const auto t0 = Clock::now();
    std::string why;
    try {
        body();
    } catch (const std::exception& e) {
        why = e.what();
    }
    const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
    if (why.empty() && budget_s > 0 && dt > budget_s)
        why = "runtime " + std::to_string(dt) + "s exceeds budget " +
              std::to_string(budget_s) + "s";
    std::printf("[%s] %2d. %s (%.1fs)%s%s\n", why.empty() ? "PASS" : "FAIL", num, name, dt,
                why.empty() ? "" : " -- ", why.c_str());
    std::fflush(stdout);
    if (!why.empty()) ++failures;
}

std::vector<char> slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + p.string());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(DYMESH_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return rc < 0 ? rc : (rc >> 8);  // decode POSIX wait status
}

VaeConfig tiny_vae_config() {
    VaeConfig c;
    c.hidden_dim = 8;
    c.latent_channels = 3;
    c.encoder_layers = 1;
    c.decoder_blocks = 1;
    c.tokens = 4;
    c.frames = 3;
    c.pe0_bands = 2;
    c.pet_bands = 1;
    return c;
}

FlowConfig tiny_flow_config() {
    FlowConfig c;
    c.blocks = 1;
    c.heads = 2;
    c.model_dim = 8;
    c.latent_channels = 3;
    c.cond_dim = 8;
    c.text_dim = 6;
    c.ffn_mult = 2;
    c.sample_steps = 8;
    return c;
}

CorpusStats unit_stats(std::size_t d, std::size_t c) {
    CorpusStats s;
    s.mu0 = Tensor::zeros({1, d});
    s.sigma0 = Tensor::full({1, d}, 1.0f);
    s.muT = Tensor::zeros({1, c});
    s.sigmaT = Tensor::full({1, c}, 1.0f);
    return s;
}

// From-scratch greedy reference: recompute min distance to the selected set
// for every candidate at every step, break ties toward the lowest index.
FpsSelection fps_reference(const float* f, std::size_t n, std::size_t dim, std::size_t k) {
    FpsSelection sel;
    sel.seed_index = 0;
    sel.indices.push_back(0);
    while (sel.indices.size() < k) {
        std::uint32_t best = 0;
        double best_d2 = -1;
        for (std::size_t i = 0; i < n; ++i) {
            if (std::find(sel.indices.begin(), sel.indices.end(), std::uint32_t(i)) !=
                sel.indices.end())
                continue;
            double min_d2 = std::numeric_limits<double>::max();
            for (std::uint32_t s : sel.indices) {
                double d2 = 0;
                for (std::size_t c = 0; c < dim; ++c) {
                    const double d = double(f[i * dim + c]) - double(f[s * dim + c]);
                    d2 += d * d;
                }
                min_d2 = std::min(min_d2, d2);
            }
            if (min_d2 > best_d2) {
                best_d2 = min_d2;
                best = std::uint32_t(i);
            }
        }
        sel.indices.push_back(best);
    }
    return sel;
}

// Shared desk-scale artifacts: criterion 7 trains the model, criterion 8
// reuses it for the sweep and ordering checks.
std::vector<DynamicMesh> desk_corpus;
std::unique_ptr<DyMeshVae> desk_model;

template <class Graph, class Vae, class Param>
void check_loss_gradients(Vae& vae, const DynamicMesh& mesh, std::size_t tokens,
                          const TensorT<double>& eps) {
    auto params = vae.params();
    for (Param* p : params) p->zero_grad();
    {
        Graph g;
        auto loss = vae.loss_nodes(g, mesh, tokens, eps);
        g.backward(loss.total);
    }
    const double h = 1e-3;
    for (Param* p : params)
        for (std::size_t i = 0; i < p->value.data.size(); ++i) {
            const double keep = p->value.data[i];
            p->value.data[i] = keep + h;
            Graph gp;
            const double fp = gp.value(vae.loss_nodes(gp, mesh, tokens, eps).total).data[0];
            p->value.data[i] = keep - h;
            Graph gm;
            const double fm = gm.value(vae.loss_nodes(gm, mesh, tokens, eps).total).data[0];
            p->value.data[i] = keep;
            const double fd = (fp - fm) / (2 * h);
            const double an = p->grad.data[i];
            const double rel =
                std::abs(an - fd) / std::max(1e-8, std::max(std::abs(an), std::abs(fd)));
            ACK(rel < 1e-3);
        }
}

}  // namespace

int main() {
    const fs::path tmp = fs::path("acceptance_tmp");
    fs::remove_all(tmp);
    fs::create_directories(tmp);

    criterion(1, "equation unit suite", 10.0, [] {
        // trajectory split/reassembly round trip
        Rng rng(11);
        for (int c = 0; c < 100; ++c) {
            DynamicMesh m = synth::random_mesh(rng, 5 + rng.below(30), 8 + rng.below(20),
                                               2 + rng.below(6));
            TrajectoryDecomposition d = decompose(m);
            for (std::size_t i = 0; i < m.vert_count * 3; ++i) ACK(d.vt[i] == 0.0f);
            std::vector<float> back = recompose(d);
            for (std::size_t i = 0; i < back.size(); ++i)
                ACK(std::abs(back[i] - m.vertices[i]) <= 1e-6f);
        }
        // latent regularizer worked values
        ACK(std::abs(kl_loss(Tensor::zeros({4, 8}), Tensor::full({4, 8}, 1.0f)) - 0.5) < 1e-9);
        ACK(std::abs(kl_loss(Tensor::full({4, 8}, 1.0f), Tensor::full({4, 8}, 1.0f)) - 1.0) <
            1e-9);
        // timestep warp: fixed points and strict monotonicity on a 1e-3 grid
        ACK(timestep_warp(0.0) == 0.0);
        ACK(std::abs(timestep_warp(0.5) - 0.5) < 1e-12);
        double prev = -1;
        for (int i = 0; i < 1000; ++i) {
            const double t = timestep_warp(i * 1e-3);
            ACK(t > prev);
            prev = t;
        }
        // guidance scale 1 collapses bitwise to the conditional prediction
        FlowConfig fc = tiny_flow_config();
        fc.cfg_scale = 1.0;
        FlowModel flow(fc, 11);
        flow.set_stats(unit_stats(fc.cond_dim, fc.latent_channels));
        Rng hr(6);
        for (auto* p : flow.params())
            if (p->name == "flow.head.weight")
                for (auto& v : p->value.data) v = float(hr.uniform(-0.2, 0.2));
        Rng tr(7);
        Tensor tok({4, 8}), text({3, 6}), uncond({1, 6});
        for (auto& v : tok.data) v = float(tr.uniform(-1.0, 1.0));
        for (auto& v : text.data) v = float(tr.uniform(-1.0, 1.0));
        for (auto& v : uncond.data) v = float(tr.uniform(-1.0, 1.0));
        Tensor got = flow.sample(tok, text, uncond, 99);
        Rng zr = Rng(99).stream("flow-sample");
        Tensor z({4, 3});
        for (auto& v : z.data) v = float(zr.normal());
        Tensor want = euler_sample(z, fc.sample_steps, [&](const Tensor& zt, double t) {
            return flow.predict_velocity(zt, tok, text, t);
        });
        ACK(got.data == want.data);
    });

    criterion(2, "masking correctness on 100 random meshes", 30.0, [] {
        Rng rng(7);
        for (int c = 0; c < 100; ++c) {
            const std::size_t n = 4 + rng.below(20);
            DynamicMesh m = synth::random_mesh(rng, n, n + 4, 2);
            AdjacencyMask mask = build_adjacency(m.faces, n);
            // masked row softmax: exact zeros off-neighborhood, rows sum to 1
            Graph g;
            Tensor scores({n, n});
            for (auto& v : scores.data) v = float(rng.uniform(-5.0, 5.0));
            const Tensor& s = g.value(g.softmax_rows(g.input(scores), &mask));
            for (std::size_t i = 0; i < n; ++i) {
                double row = 0;
                for (std::size_t j = 0; j < n; ++j) {
                    if (!mask.adj(i, j)) ACK(s.at(i, j) == 0.0f);
                    row += s.at(i, j);
                }
                ACK(std::abs(row - 1.0) <= 1e-5);
            }
            // one attention layer: non-neighbors cannot influence a vertex
            const std::size_t d = 8;
            MaskedSelfAttentionT<float> attn;
            Rng init(100 + c);
            attn.init("attn", d, init);
            Tensor x({n, d});
            for (auto& v : x.data) v = float(rng.uniform(-1.0, 1.0));
            std::size_t pi = n, pj = n;
            for (std::size_t i = 0; i < n && pi == n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    if (!mask.adj(i, j)) {
                        pi = i;
                        pj = j;
                        break;
                    }
            if (pi == n) continue;
            auto run = [&](const Tensor& in) {
                Graph gg;
                return gg.value(attn.apply(gg, gg.input(in), &mask));
            };
            Tensor base = run(x);
            Tensor xp = x;
            for (std::size_t k = 0; k < d; ++k) xp.at(pj, k) += float(rng.uniform(-3.0, 3.0));
            Tensor pert = run(xp);
            for (std::size_t k = 0; k < d; ++k) ACK(pert.at(pi, k) == base.at(pi, k));
        }
    });

    criterion(3, "gradient fidelity vs finite differences", 120.0, [] {
        // autoencoder loss on a 12-vertex fixture
        const VaeConfig cfg = tiny_vae_config();
        DyMeshVaeT<double> vae(cfg, 41);
        Rng mr(43);
        const DynamicMesh m = synth::random_mesh(mr, 12, 16, 3, 0.2);
        TensorT<double> eps({4, cfg.latent_channels});
        Rng er(6);
        for (auto& v : eps.data) v = er.normal();
        check_loss_gradients<GraphT<double>, DyMeshVaeT<double>, ParameterT<double>>(vae, m, 4,
                                                                                    eps);

        // flow matching loss
        FlowConfig fc = tiny_flow_config();
        FlowModelT<double> flow(fc, 17);
        flow.set_stats(unit_stats(fc.cond_dim, fc.latent_channels));
        Rng rng(9);
        TensorT<double> z({3, 3}), tok({3, 8}), text({2, 6}), tgt({3, 3});
        for (auto& v : z.data) v = rng.uniform(-1.0, 1.0);
        for (auto& v : tok.data) v = rng.uniform(-1.0, 1.0);
        for (auto& v : text.data) v = rng.uniform(-1.0, 1.0);
        for (auto& v : tgt.data) v = rng.uniform(-1.0, 1.0);
        auto loss_value = [&]() {
            GraphT<double> g;
            const int v = flow.velocity_nodes(g, z, tok, text, 0.4);
            return g.value(g.mean_all(g.square(g.sub(v, g.input(tgt))))).data[0];
        };
        auto params = flow.params();
        for (auto* p : params) p->zero_grad();
        {
            GraphT<double> g;
            const int v = flow.velocity_nodes(g, z, tok, text, 0.4);
            g.backward(g.mean_all(g.square(g.sub(v, g.input(tgt)))));
        }
        const double h = 1e-3;
        for (auto* p : params)
            for (std::size_t i = 0; i < p->value.data.size(); ++i) {
                const double keep = p->value.data[i];
                p->value.data[i] = keep + h;
                const double fp = loss_value();
                p->value.data[i] = keep - h;
                const double fm = loss_value();
                p->value.data[i] = keep;
                const double fd = (fp - fm) / (2 * h);
                const double an = p->grad.data[i];
                const double rel =
                    std::abs(an - fd) / std::max(1e-8, std::max(std::abs(an), std::abs(fd)));
                ACK(rel < 1e-3);
            }
    });

    criterion(4, "farthest-point sampling oracle equivalence (1000 cases)", 30.0, [] {
        Rng rng(44);
        for (int c = 0; c < 1000; ++c) {
            const std::size_t n = 2 + rng.below(127);
            const std::size_t dim = 1 + rng.below(6);
            const std::size_t k = 1 + rng.below(n);
            std::vector<float> f(n * dim);
            for (auto& v : f) v = float(rng.uniform(-1.0, 1.0));
            if (c % 4 == 0)  // quantize so exact ties actually occur
                for (auto& v : f) v = std::round(v * 2.0f) / 2.0f;
            FpsSelection got = farthest_point_sampling(f.data(), n, dim, k);
            FpsSelection again = farthest_point_sampling(f.data(), n, dim, k);
            ACK(got.indices == again.indices);
            ACK(got.indices == fps_reference(f.data(), n, dim, k).indices);
        }
    });

    criterion(5, "padding invisibility over 50 mixed batches", 60.0, [] {
        Rng rng(91);
        const VaeConfig cfg = tiny_vae_config();
        DyMeshVae vae(cfg, 47);
        Rng hr(3);
        for (auto* p : vae.params())
            if (p->name == "dec.out.weight")
                for (auto& v : p->value.data) v = float(hr.uniform(-0.3, 0.3));
        for (int c = 0; c < 50; ++c) {
            std::vector<DynamicMesh> items;
            const std::size_t b = 2 + rng.below(3);
            for (std::size_t i = 0; i < b; ++i)
                items.push_back(synth::random_mesh(rng, 6 + rng.below(24), 8 + rng.below(12), 3));
            PaddedBatch batch = pad_batch(items);
            for (std::size_t i = 0; i < b; ++i) {
                DynamicMesh item = unpad_item(batch, i);
                auto direct = vae.encode(items[i], 4);
                auto batched = vae.encode(item, 4);
                ACK(direct.mu.data.size() == batched.mu.data.size());
                for (std::size_t j = 0; j < direct.mu.data.size(); ++j)
                    ACK(std::abs(direct.mu.data[j] - batched.mu.data[j]) <= 1e-6f);
                LatentPair pair{direct.v0_tokens, direct.mu};
                Tensor da = vae.decode(direct.v0_full, pair);
                LatentPair pairb{batched.v0_tokens, batched.mu};
                Tensor db = vae.decode(batched.v0_full, pairb);
                for (std::size_t j = 0; j < da.data.size(); ++j)
                    ACK(std::abs(da.data[j] - db.data[j]) <= 1e-6f);
            }
        }
    });

    criterion(6, "Euler sampler exact on a constant velocity field", 10.0, [] {
        Rng rng(4);
        Tensor x0({6, 4}), eps({6, 4});
        for (auto& v : x0.data) v = float(rng.uniform(-1.0, 1.0));
        for (auto& v : eps.data) v = float(rng.uniform(-1.0, 1.0));
        Tensor field({6, 4});
        for (std::size_t i = 0; i < field.data.size(); ++i)
            field.data[i] = x0.data[i] - eps.data[i];
        Tensor out = euler_sample(eps, 64, [&](const Tensor&, double) { return field; });
        for (std::size_t i = 0; i < out.data.size(); ++i)
            ACK(std::abs(out.data[i] - x0.data[i]) <= 1e-5f);
    });

    criterion(7, "desk-scale autoencoder overfit (frame-wise avg L2 < 0.05)", 1800.0, [] {
        desk_corpus.clear();
        const char* names[4] = {"oscillating-sphere", "waving-grid", "twisting-cylinder",
                                "articulated-pair"};
        for (int v = 0; v < 2; ++v)
            for (const char* n : names)
                desk_corpus.push_back(normalize_window(synth::generate(n, 16, std::size_t(v))));
        for (const auto& m : desk_corpus) ACK(m.vert_count <= 200);

        VaeConfig cfg;
        cfg.hidden_dim = 32;
        cfg.latent_channels = 8;
        cfg.encoder_layers = 2;
        cfg.decoder_blocks = 2;
        cfg.tokens = 256;
        cfg.frames = 16;
        cfg.pe0_bands = 4;
        cfg.pet_bands = 2;
        cfg.learning_rate = 2e-3;
        desk_model = std::make_unique<DyMeshVae>(cfg, 123);
        Adam opt(desk_model->params(), float(cfg.learning_rate));
        Rng noise(5);
        for (int s = 0; s < 600; ++s) {
            const DynamicMesh* m = &desk_corpus[std::size_t(s) % desk_corpus.size()];
            auto rep = desk_model->train_step({m}, opt, noise);
            ACK(std::isfinite(rep.total));
        }
        double err = 0;
        for (const auto& m : desk_corpus) {
            const std::size_t n = std::min<std::size_t>(cfg.tokens, m.vert_count);
            err += reconstruction_error(desk_model->reconstruct(m, n), m);
        }
        err /= double(desk_corpus.size());
        ACK(err < 0.05);
    });

    criterion(8, "trend reproduction: ratio sweep and component ablation", 600.0, [] {
        ACK(desk_model != nullptr);
        std::vector<const DynamicMesh*> ptrs;
        for (const auto& m : desk_corpus) ptrs.push_back(&m);
        SweepResult sw = fps_ratio_sweep(*desk_model, ptrs);
        // errors must be non-increasing in the sampling ratio for every mesh
        for (std::size_t i = 1; i < sw.entries.size(); ++i) {
            const SweepEntry& prev = sw.entries[i - 1];
            const SweepEntry& cur = sw.entries[i];
            if (cur.mesh_index != prev.mesh_index || prev.skipped || cur.skipped) continue;
            ACK(cur.frame_avg_l2 <= prev.frame_avg_l2);
        }

        // all-components configuration wins the six-way comparison
        std::vector<DynamicMesh> corpus;
        corpus.push_back(normalize_window(synth::articulated_pair(4, 8, 0.3)));
        corpus.push_back(normalize_window(synth::waving_grid(6, 5, 8)));
        corpus.push_back(normalize_window(synth::twisting_cylinder(6, 5, 8)));
        std::vector<const DynamicMesh*> cptr;
        for (const auto& m : corpus) cptr.push_back(&m);
        VaeConfig base;
        base.hidden_dim = 16;
        base.latent_channels = 4;
        base.encoder_layers = 1;
        base.decoder_blocks = 1;
        base.tokens = 8;
        base.frames = 8;
        base.pe0_bands = 3;
        base.pet_bands = 2;
        base.learning_rate = 2e-3;
        double full_err = -1;
        double best_other = std::numeric_limits<double>::max();
        for (const AblationFlags& f : ablation_grid()) {
            auto rep = ablation_run<float>(base, f, cptr, 600, 21);
            if (rep.flags.label() == "full")
                full_err = rep.frame_avg_l2;
            else
                best_other = std::min(best_other, rep.frame_avg_l2);
        }
        ACK(full_err >= 0);
        ACK(full_err < best_other);
    });

    criterion(9, "pipeline determinism and curation oracles", 120.0, [&tmp] {
        const fs::path out = tmp / "curate";
        const std::string spec =
            "--seed 7 dataset-build --synthetic oscillating-sphere:1:32 "
            "--synthetic twisting-cylinder:1:32 --out " + out.string() + " --window 16";
        ACK(run_cli(spec) == 0);
        const std::vector<char> first = slurp(out / "manifest.jsonl");
        fs::remove_all(out);
        ACK(run_cli(spec) == 0);
        ACK(slurp(out / "manifest.jsonl") == first);  // byte-identical across runs
        // two 32-frame sources, window 16 -> 6 windows each
        const std::size_t lines = std::size_t(
            std::count(first.begin(), first.end(), '\n'));
        ACK(lines == 12);

        // slice counts against a brute-force enumeration oracle
        Rng rng(4);
        for (int c = 0; c < 50; ++c) {
            const std::size_t T = 1 + rng.below(70);
            const std::size_t w = 2 + rng.below(20);
            DynamicMesh anim = synth::random_mesh(rng, 5, 6, T);
            std::size_t count = 0;
            for (std::size_t s = 0; s + w <= T; s += w) count += 2;
            for (std::size_t s = w / 2; s + w <= T; s += w) count += 2;
            ACK(slice_windows(anim, w).size() == count);
        }
        {
            DynamicMesh a40 = synth::random_mesh(rng, 5, 6, 40);
            ACK(slice_windows(a40, 16).size() == 8);  // both half-offset passes fit
            DynamicMesh a16 = synth::random_mesh(rng, 5, 6, 16);
            ACK(slice_windows(a16, 16).size() == 2);
        }

        // filters against brute-force predicates
        for (int c = 0; c < 200; ++c) {
            DynamicMesh m = synth::random_mesh(rng, 4 + rng.below(10), 6, 2 + rng.below(5),
                                               rng.uniform(0.0, 0.8));
            float worst = 0;
            for (std::size_t t = 0; t + 1 < m.frames; ++t)
                for (std::size_t i = 0; i < m.vert_count * 3; ++i)
                    worst = std::max(worst, std::abs(m.frame(t)[i] - m.frame(t + 1)[i]));
            ACK(motion_filter(m).keep == (worst >= 0.01f && worst <= 0.5f));
            ACK(ratio_filter(m).keep ==
                (double(m.faces.size()) <= 2.5 * double(m.vert_count)));
        }
    });

    criterion(10, "storage format round trips and 10k-case header fuzz", 60.0, [&tmp] {
        Rng rng(1);
        for (int c = 0; c < 20; ++c) {
            DynamicMesh m = synth::random_mesh(rng, 5 + rng.below(30), 8 + rng.below(40),
                                               1 + rng.below(8));
            if (c % 2 == 0) m.caption = "case " + std::to_string(c);
            const fs::path p1 = tmp / "rt_a.dmb", p2 = tmp / "rt_b.dmb";
            dmb_write(p1.string(), m);
            DynamicMesh back = dmb_read(p1.string());
            ACK(back.vertices == m.vertices);
            ACK(back.faces == m.faces);
            ACK(back.caption == m.caption);
            dmb_write(p2.string(), back);
            ACK(slurp(p1) == slurp(p2));
        }

        DynamicMesh m = synth::oscillating_sphere(4, 4, 3);
        const fs::path good_path = tmp / "fuzz_good.dmb";
        dmb_write(good_path.string(), m);
        const std::vector<char> good = slurp(good_path);
        Rng fr(2);
        const fs::path path = tmp / "fuzz_case.dmb";
        int failed = 0, ok = 0;
        for (int c = 0; c < 10000; ++c) {
            std::vector<char> bytes = good;
            const int mode = int(fr.below(4));
            if (mode == 0) {
                for (int k = 0; k < 4; ++k) bytes[fr.below(bytes.size())] = char(fr.below(256));
            } else if (mode == 1) {
                for (int k = 0; k < 6; ++k)
                    bytes[fr.below(std::min<std::size_t>(18, bytes.size()))] =
                        char(fr.below(256));
            } else if (mode == 2) {
                bytes.resize(fr.below(bytes.size() + 1));
            } else {
                bytes.resize(fr.below(64));
                for (auto& b : bytes) b = char(fr.below(256));
            }
            std::ofstream(path, std::ios::binary)
                .write(bytes.data(), std::streamsize(bytes.size()));
            try {
                DynamicMesh got = dmb_read(path.string());
                validate_mesh(got);
                ++ok;
            } catch (const DmbError&) {
                ++failed;
            } catch (const MeshError&) {
                ++failed;
            }
        }
        ACK(ok + failed == 10000);
        ACK(failed > 9000);
    });

    criterion(11, "end-to-end animate via the command line", 0.0, [&tmp] {
        const fs::path dir = tmp / "e2e";
        ACK(run_cli("--seed 7 dataset-build --synthetic oscillating-sphere:2:32 "
                    "--synthetic waving-grid:2:32 --out " + (dir / "data").string() +
                    " --window 16") == 0);

        VaeConfig vc;
        vc.hidden_dim = 16;
        vc.latent_channels = 4;
        vc.encoder_layers = 1;
        vc.decoder_blocks = 1;
        vc.tokens = 16;
        vc.frames = 16;
        vc.pe0_bands = 3;
        vc.pet_bands = 2;
        vc.learning_rate = 2e-3;
        FlowConfig fc;
        fc.blocks = 1;
        fc.heads = 2;
        fc.model_dim = 16;
        fc.latent_channels = 4;
        fc.cond_dim = 16;
        fc.text_dim = 32;
        fc.ffn_mult = 2;
        fc.sample_steps = 8;
        {
            json jv = vc;
            std::ofstream(dir / "vae.json") << jv.dump(2) << '\n';
            json jf = fc;
            std::ofstream(dir / "flow.json") << jf.dump(2) << '\n';
        }
        const std::string vj = (dir / "vae.json").string();
        const std::string fj = (dir / "flow.json").string();
        const std::string data = (dir / "data").string();
        const std::string vckpt = (dir / "vae_run/vae.ckpt").string();
        const std::string fckpt = (dir / "flow_run/flow.ckpt").string();
        const std::string stats = (dir / "stats.bin").string();
        ACK(run_cli("--seed 7 train-vae --config " + vj + " --data " + data + " --out " +
                    (dir / "vae_run").string() + " --steps 200 --batch 2") == 0);
        ACK(run_cli("--seed 7 compute-stats --vae-config " + vj + " --vae-ckpt " + vckpt +
                    " --data " + data + " --out " + stats) == 0);
        ACK(run_cli("--seed 7 train-flow --config " + fj + " --vae-config " + vj +
                    " --vae-ckpt " + vckpt + " --stats " + stats + " --data " + data +
                    " --out " + (dir / "flow_run").string() + " --steps 60 --batch 2") == 0);

        std::string mesh_path;
        for (const auto& e : fs::directory_iterator(dir / "data"))
            if (e.path().extension() == ".dmb" &&
                (mesh_path.empty() || e.path().string() < mesh_path))
                mesh_path = e.path().string();
        ACK(!mesh_path.empty());

        const auto t0 = Clock::now();
        const std::string common = " animate --vae-config " + vj + " --vae-ckpt " + vckpt +
                                   " --flow-config " + fj + " --flow-ckpt " + fckpt +
                                   " --stats " + stats + " --mesh " + mesh_path +
                                   " --prompt \"a sphere pulsing in place\" --out ";
        ACK(run_cli("--seed 1 --threads 4" + common + (dir / "anim1").string()) == 0);
        ACK(run_cli("--seed 2 --threads 4" + common + (dir / "anim2").string()) == 0);
        const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
        ACK(dt < 60.0);

        const DynamicMesh input = dmb_read(mesh_path);
        const DynamicMesh a1 = dmb_read((dir / "anim1/animation.dmb").string());
        const DynamicMesh a2 = dmb_read((dir / "anim2/animation.dmb").string());
        ACK(a1.vert_count == input.vert_count);
        ACK(a1.faces == input.faces);
        ACK(a2.faces == input.faces);
        for (std::size_t i = 0; i < input.vert_count * 3; ++i)
            ACK(a1.frame(0)[i] == input.frame(0)[i]);
        for (std::size_t i = 0; i < input.vert_count * 3; ++i)
            ACK(a2.frame(0)[i] == input.frame(0)[i]);
        ACK(a1.vertices != a2.vertices);
    });

    fs::remove_all(tmp);
    if (failures == 0) std::printf("all 11 criteria passed\n");
    return failures;
}
