#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dymesh/graph.hpp"
#include "dymesh/nn.hpp"
#include "dymesh/rng.hpp"
#include "dymesh/tensor.hpp"
#include "dymesh/text_embed.hpp"
#include "dymesh/vae.hpp"

namespace dymesh {

/// Per-channel corpus statistics of the shape tokens and trajectory latents,
/// used to normalize both streams before the flow model.
struct CorpusStats {
    Tensor mu0, sigma0;   // [1, d] over shape tokens
    Tensor muT, sigmaT;   // [1, C] over latent means

    static constexpr char kMagic[4] = {'D', 'Y', 'S', 'T'};
    static constexpr std::uint16_t kVersion = 1;

    void save(const std::string& path) const {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw std::runtime_error("stats: cannot write " + path);
        os.write(kMagic, 4);
        auto put = [&os](const auto& v) {
            os.write(reinterpret_cast<const char*>(&v), sizeof(v));
        };
        put(kVersion);
        put(std::uint32_t(mu0.size()));
        put(std::uint32_t(muT.size()));
        auto dump = [&os](const Tensor& t) {
            os.write(reinterpret_cast<const char*>(t.data.data()),
                     std::streamsize(t.data.size() * sizeof(float)));
        };
        dump(mu0);
        dump(sigma0);
        dump(muT);
        dump(sigmaT);
    }

    static CorpusStats load(const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw std::runtime_error("stats: cannot open " + path);
        char magic[4];
        is.read(magic, 4);
        if (!is || std::memcmp(magic, kMagic, 4) != 0)
            throw std::runtime_error("stats: bad magic");
        std::uint16_t version;
        is.read(reinterpret_cast<char*>(&version), sizeof(version));
        if (!is || version != kVersion) throw std::runtime_error("stats: bad version");
        std::uint32_t d, c;
        is.read(reinterpret_cast<char*>(&d), sizeof(d));
        is.read(reinterpret_cast<char*>(&c), sizeof(c));
        CorpusStats s;
        auto pull = [&is](Tensor& t, std::size_t n) {
            t = Tensor({1, n});
            is.read(reinterpret_cast<char*>(t.data.data()), std::streamsize(n * sizeof(float)));
        };
        pull(s.mu0, d);
        pull(s.sigma0, d);
        pull(s.muT, c);
        pull(s.sigmaT, c);
        if (!is) throw std::runtime_error("stats: truncated");
        return s;
    }
};

/// Streaming per-channel mean/stddev over encoded corpus latents; stddev is
/// floored at 1e-6 so normalization never divides by zero.
class StatsAccumulator {
  public:
    void add(const Tensor& rows, std::vector<double>& mean, std::vector<double>& m2,
             std::size_t& count) {
        const std::size_t c = rows.cols();
        if (mean.empty()) {
            mean.assign(c, 0.0);
            m2.assign(c, 0.0);
        }
        for (std::size_t i = 0; i < rows.rows(); ++i) {
            ++count;
            for (std::size_t j = 0; j < c; ++j) {
                const double x = rows.data[i * c + j];
                const double delta = x - mean[j];
                mean[j] += delta / double(count);
                m2[j] += delta * (x - mean[j]);
            }
        }
    }

    void add_shape_tokens(const Tensor& t) { add(t, mean0_, m2_0_, n0_); }
    void add_latents(const Tensor& t) { add(t, mean_t_, m2_t_, nt_); }

    CorpusStats finish() const {
        if (n0_ == 0 || nt_ == 0) throw std::runtime_error("stats: empty corpus");
        CorpusStats s;
        auto emit = [](const std::vector<double>& mean, const std::vector<double>& m2,
                       std::size_t n, Tensor& mu, Tensor& sigma) {
            mu = Tensor({1, mean.size()});
            sigma = Tensor({1, mean.size()});
            for (std::size_t j = 0; j < mean.size(); ++j) {
                mu.data[j] = float(mean[j]);
                sigma.data[j] = std::max(1e-6f, float(std::sqrt(m2[j] / double(n))));
            }
        };
        emit(mean0_, m2_0_, n0_, s.mu0, s.sigma0);
        emit(mean_t_, m2_t_, nt_, s.muT, s.sigmaT);
        return s;
    }

  private:
    std::vector<double> mean0_, m2_0_, mean_t_, m2_t_;
    std::size_t n0_ = 0, nt_ = 0;
};

struct FlowConfig {
    std::size_t blocks = 12;
    std::size_t heads = 8;
    std::size_t model_dim = 512;
    std::size_t latent_channels = 32;
    std::size_t cond_dim = 512;  // width of the shape tokens (VAE hidden dim)
    std::size_t text_dim = 768;
    std::size_t ffn_mult = 4;
    double cfg_scale = 3.0;
    std::size_t sample_steps = 64;
    double cond_drop_prob = 0.1;
    double learning_rate = 2e-4;

    void validate() const {
        if (blocks == 0 || heads == 0 || model_dim == 0 || latent_channels == 0 ||
            cond_dim == 0 || text_dim == 0 || sample_steps == 0)
            throw std::invalid_argument("flow config: all extents must be positive");
        if (model_dim % heads != 0)
            throw std::invalid_argument("flow config: model_dim must divide by heads");
        if (cond_drop_prob < 0 || cond_drop_prob >= 1)
            throw std::invalid_argument("flow config: cond_drop_prob must be in [0,1)");
    }
};

/// Timestep warp of the diffusion process: t = 1 - 1/(tan(pi*u/2)+1).
/// Strictly increasing on [0,1), fixes 0 and 0.5.
inline double timestep_warp(double u) {
    if (u < 0.0 || u >= 1.0) throw std::domain_error("timestep_warp: u must be in [0,1)");
    return 1.0 - 1.0 / (std::tan(0.5 * 3.14159265358979323846 * u) + 1.0);
}

template <class T>
struct NoisySampleT {
    TensorT<T> z_tilde;
    double t = 0;
    TensorT<T> epsilon;
};

using NoisySample = NoisySampleT<float>;

/// z~ = (1-t) z + t eps with eps ~ N(0,1) and t = timestep_warp(u).
template <class T>
NoisySampleT<T> noise_latent(const TensorT<T>& z, double u, Rng& rng) {
    NoisySampleT<T> out;
    out.t = timestep_warp(u);
    out.epsilon = TensorT<T>({z.rows(), z.cols()});
    for (auto& v : out.epsilon.data) v = T(rng.normal());
    out.z_tilde = z;
    for (std::size_t i = 0; i < z.data.size(); ++i)
        out.z_tilde.data[i] = T((1.0 - out.t) * double(z.data[i]) +
                                out.t * double(out.epsilon.data[i]));
    return out;
}

/// Rectified-flow regression target u = z - eps.
template <class T>
TensorT<T> velocity_target(const NoisySampleT<T>& sample, const TensorT<T>& z) {
    if (!sample.epsilon.same_shape(z)) throw std::invalid_argument("velocity target: shape mismatch");
    TensorT<T> out = z;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= sample.epsilon.data[i];
    return out;
}

/// Euler integration of the flow ODE from t=1 down to t=0 with uniform
/// steps. The velocity convention is z - eps (the negative of dz~/dt), so
/// stepping toward t=0 adds dt * v. `field(z, t)` supplies the velocity; for
/// a constant field v = x0 - eps this integrator is exact.
template <class T, class Field>
TensorT<T> euler_sample(TensorT<T> z, std::size_t steps, Field&& field) {
    if (steps == 0) throw std::invalid_argument("euler_sample: steps must be positive");
    const double dt = 1.0 / double(steps);
    double t = 1.0;
    for (std::size_t step = 0; step < steps; ++step) {
        // The network is evaluated just inside the domain at t=1.
        const TensorT<T> v = field(z, std::min(t, 1.0 - 1e-9));
        for (std::size_t i = 0; i < z.data.size(); ++i) z.data[i] += T(dt) * v.data[i];
        t -= dt;
    }
    return z;
}

/// Shape-guided text-to-trajectory model: joint trajectory/text attention
/// blocks with modality-wise timestep-conditioned normalization, trained to
/// predict the straight-line velocity between latent and noise.
template <class T>
class FlowModelT {
  public:
    using Tensor = TensorT<T>;
    using Graph = GraphT<T>;

    FlowModelT(FlowConfig cfg, std::uint64_t init_seed) : cfg_(std::move(cfg)) {
        cfg_.validate();
        Rng rng = Rng(init_seed).stream("flow-init");
        const std::size_t D = cfg_.model_dim;
        in_proj_.init("flow.in_proj", cfg_.cond_dim + cfg_.latent_channels, D, rng);
        text_proj_.init("flow.text_proj", cfg_.text_dim, D, rng);
        t_mlp1_.init("flow.t1", D, D, rng);
        t_mlp2_.init("flow.t2", D, D, rng);
        blocks_.resize(cfg_.blocks);
        for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].init(i, cfg_, rng);
        final_mod_.init("flow.final_mod", D, 2 * D, rng, /*zero_init=*/true);
        head_.init("flow.head", D, cfg_.latent_channels, rng, /*zero_init=*/true);
    }

    const FlowConfig& config() const { return cfg_; }

    void set_stats(CorpusStats stats) {
        stats_mu0_ = stats.mu0.cast<T>();
        stats_sigma0_ = stats.sigma0.cast<T>();
        stats_mut_ = stats.muT.cast<T>();
        stats_sigmat_ = stats.sigmaT.cast<T>();
        has_stats_ = true;
    }
    bool has_stats() const { return has_stats_; }

    std::vector<ParameterT<T>*> params() {
        std::vector<ParameterT<T>*> out;
        in_proj_.collect(out);
        text_proj_.collect(out);
        t_mlp1_.collect(out);
        t_mlp2_.collect(out);
        for (auto& b : blocks_) b.collect(out);
        final_mod_.collect(out);
        head_.collect(out);
        return out;
    }

    /// Records the velocity network; returns the de-normalized [n, C] output.
    int velocity_nodes(Graph& g, const Tensor& z_tilde, const Tensor& v0_tokens,
                       const Tensor& text_tokens, double t) const {
        if (!has_stats_) throw std::runtime_error("flow: corpus stats not loaded");
        const std::size_t n = z_tilde.rows();
        if (v0_tokens.rows() != n) throw std::invalid_argument("flow: token count mismatch");

        // Normalize both latent streams with the global corpus statistics,
        // then fuse along channels.
        Tensor fused({n, cfg_.cond_dim + cfg_.latent_channels});
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < cfg_.cond_dim; ++j)
                fused.data[i * fused.cols() + j] =
                    (v0_tokens.data[i * cfg_.cond_dim + j] - stats_mu0_.data[j]) /
                    stats_sigma0_.data[j];
            for (std::size_t j = 0; j < cfg_.latent_channels; ++j)
                fused.data[i * fused.cols() + cfg_.cond_dim + j] =
                    (z_tilde.data[i * cfg_.latent_channels + j] - stats_mut_.data[j]) /
                    stats_sigmat_.data[j];
        }

        int x_traj = in_proj_.apply(g, g.input(std::move(fused)));
        int x_text = text_proj_.apply(g, g.input(text_tokens));

        const int cond = t_mlp2_.apply(g, g.silu(t_mlp1_.apply(g, g.input(timestep_features(t)))));

        for (auto& block : blocks_) std::tie(x_traj, x_text) = block.apply(g, x_traj, x_text, cond, cfg_);

        // Final AdaLN + zero-initialized head; output scaled back to
        // un-normalized latent units.
        const int mod = final_mod_.apply(g, g.silu(cond));
        const std::size_t D = cfg_.model_dim;
        int h = g.layer_norm(x_traj);
        h = g.add_rowvec(g.mul_rowvec(h, g.add_scalar(g.slice_cols(mod, 0, D), T(1))),
                         g.slice_cols(mod, D, 2 * D));
        return g.mul_rowvec(head_.apply(g, h), g.input(stats_sigmat_));
    }

    Tensor predict_velocity(const Tensor& z_tilde, const Tensor& v0_tokens,
                            const Tensor& text_tokens, double t) const {
        Graph g;
        return g.value(velocity_nodes(g, z_tilde, v0_tokens, text_tokens, t));
    }

    struct TrainItem {
        Tensor v0_tokens;
        Tensor z;
        Tensor text_tokens;
    };

    struct StepReport {
        double loss = 0;
    };

    /// One rectified-flow step: per item draw u ~ U[0,1), noise the latent,
    /// drop the text condition with probability cond_drop_prob, and regress
    /// the velocity toward z - eps. Mean-of-means reduction over the batch.
    StepReport train_step(const std::vector<TrainItem>& batch, const Tensor& uncond_text,
                          AdamT<T>& opt, Rng& rng) {
        if (batch.empty()) throw std::invalid_argument("flow train: empty batch");
        opt.zero_grad();
        StepReport rep;
        const T inv_b = T(1) / T(batch.size());
        for (const auto& item : batch) {
            const double u = rng.uniform();
            NoisySampleT<T> noisy = noise_latent(item.z, u, rng);
            const bool drop = rng.uniform() < cfg_.cond_drop_prob;
            const Tensor& text = drop ? uncond_text : item.text_tokens;
            Graph g;
            const int v = velocity_nodes(g, noisy.z_tilde, item.v0_tokens, text, noisy.t);
            const int target = g.input(velocity_target(noisy, item.z));
            const int loss = g.mean_all(g.square(g.sub(v, target)));
            g.backward(g.scale(loss, inv_b));
            rep.loss += double(g.value(loss).data[0]) / batch.size();
        }
        if (!std::isfinite(rep.loss)) throw std::runtime_error("flow train: non-finite loss");
        opt.step();
        return rep;
    }

    /// Euler integration of the flow ODE from noise (t=1) to data (t=0) with
    /// classifier-free guidance. The trained velocity is z - eps, the
    /// negative of dz~/dt, so stepping toward t=0 adds dt * v. gamma=1
    /// collapses to the conditional branch alone and gamma=0 to the
    /// unconditional one; both shortcuts skip the redundant evaluation.
    Tensor sample(const Tensor& v0_tokens, const Tensor& text_tokens, const Tensor& uncond_text,
                  std::uint64_t rng_seed) const {
        const std::size_t n = v0_tokens.rows(), C = cfg_.latent_channels;
        Rng rng = Rng(rng_seed).stream("flow-sample");
        Tensor z({n, C});
        for (auto& v : z.data) v = T(rng.normal());

        const double gamma = cfg_.cfg_scale;
        return euler_sample(std::move(z), cfg_.sample_steps, [&](const Tensor& zt, double t) {
            if (gamma == 1.0) return predict_velocity(zt, v0_tokens, text_tokens, t);
            if (gamma == 0.0) return predict_velocity(zt, v0_tokens, uncond_text, t);
            const Tensor vc = predict_velocity(zt, v0_tokens, text_tokens, t);
            Tensor v = predict_velocity(zt, v0_tokens, uncond_text, t);
            for (std::size_t i = 0; i < v.data.size(); ++i)
                v.data[i] += T(gamma) * (vc.data[i] - v.data[i]);
            return v;
        });
    }

  private:
    struct Block {
        LinearT<T> mod_traj, mod_text;
        LinearT<T> q_traj, k_traj, v_traj, o_traj;
        LinearT<T> q_text, k_text, v_text, o_text;
        LinearT<T> ffn1_traj, ffn2_traj, ffn1_text, ffn2_text;

        void init(std::size_t i, const FlowConfig& cfg, Rng& rng) {
            const std::string p = "flow.block" + std::to_string(i);
            const std::size_t D = cfg.model_dim, F = cfg.ffn_mult * D;
            mod_traj.init(p + ".mod_traj", D, 6 * D, rng, /*zero_init=*/true);
            mod_text.init(p + ".mod_text", D, 6 * D, rng, /*zero_init=*/true);
            q_traj.init(p + ".q_traj", D, D, rng);
            k_traj.init(p + ".k_traj", D, D, rng);
            v_traj.init(p + ".v_traj", D, D, rng);
            o_traj.init(p + ".o_traj", D, D, rng);
            q_text.init(p + ".q_text", D, D, rng);
            k_text.init(p + ".k_text", D, D, rng);
            v_text.init(p + ".v_text", D, D, rng);
            o_text.init(p + ".o_text", D, D, rng);
            ffn1_traj.init(p + ".ffn1_traj", D, F, rng);
            ffn2_traj.init(p + ".ffn2_traj", F, D, rng);
            ffn1_text.init(p + ".ffn1_text", D, F, rng);
            ffn2_text.init(p + ".ffn2_text", F, D, rng);
        }

        std::pair<int, int> apply(GraphT<T>& g, int x_traj, int x_text, int cond,
                                  const FlowConfig& cfg) {
            const std::size_t D = cfg.model_dim;
            const std::size_t n = g.value(x_traj).rows(), s = g.value(x_text).rows();
            const int c_act = g.silu(cond);
            const int mt = mod_traj.apply(g, c_act);
            const int mx = mod_text.apply(g, c_act);
            auto modulate = [&](int x, int mod, std::size_t slot) {
                const int sc = g.slice_cols(mod, slot * D, (slot + 1) * D);
                const int sh = g.slice_cols(mod, (slot + 1) * D, (slot + 2) * D);
                return g.add_rowvec(g.mul_rowvec(g.layer_norm(x), g.add_scalar(sc, T(1))), sh);
            };
            const int h_traj = modulate(x_traj, mt, 0);
            const int h_text = modulate(x_text, mx, 0);

            // Joint attention over the concatenated token sequences with
            // per-modality projections.
            const int Q = g.concat_rows(q_traj.apply(g, h_traj), q_text.apply(g, h_text));
            const int K = g.concat_rows(k_traj.apply(g, h_traj), k_text.apply(g, h_text));
            const int V = g.concat_rows(v_traj.apply(g, h_traj), v_text.apply(g, h_text));
            const std::size_t dh = D / cfg.heads;
            int joined = -1;
            for (std::size_t h = 0; h < cfg.heads; ++h) {
                const int qh = g.slice_cols(Q, h * dh, (h + 1) * dh);
                const int kh = g.slice_cols(K, h * dh, (h + 1) * dh);
                const int vh = g.slice_cols(V, h * dh, (h + 1) * dh);
                const int A = g.softmax_rows(g.scale(g.matmul_nt(qh, kh), T(1) / std::sqrt(T(dh))));
                const int oh = g.matmul(A, vh);
                joined = (h == 0) ? oh : g.concat_cols(joined, oh);
            }
            const int a_traj = o_traj.apply(g, g.slice_rows(joined, 0, n));
            const int a_text = o_text.apply(g, g.slice_rows(joined, n, n + s));
            auto gate = [&](int mod, std::size_t slot) {
                return g.slice_cols(mod, slot * D, (slot + 1) * D);
            };
            x_traj = g.add(x_traj, g.mul_rowvec(a_traj, gate(mt, 2)));
            x_text = g.add(x_text, g.mul_rowvec(a_text, gate(mx, 2)));

            // Per-stream feed-forward with its own modulation triple.
            auto ffn = [&](int x, int mod, LinearT<T>& f1, LinearT<T>& f2) {
                const int sc = g.slice_cols(mod, 3 * D, 4 * D);
                const int sh = g.slice_cols(mod, 4 * D, 5 * D);
                const int gt = g.slice_cols(mod, 5 * D, 6 * D);
                int h2 = g.add_rowvec(
                    g.mul_rowvec(g.layer_norm(x), g.add_scalar(sc, T(1))), sh);
                h2 = f2.apply(g, g.gelu(f1.apply(g, h2)));
                return g.add(x, g.mul_rowvec(h2, gt));
            };
            x_traj = ffn(x_traj, mt, ffn1_traj, ffn2_traj);
            x_text = ffn(x_text, mx, ffn1_text, ffn2_text);
            return {x_traj, x_text};
        }

        void collect(std::vector<ParameterT<T>*>& out) {
            mod_traj.collect(out);
            mod_text.collect(out);
            q_traj.collect(out);
            k_traj.collect(out);
            v_traj.collect(out);
            o_traj.collect(out);
            q_text.collect(out);
            k_text.collect(out);
            v_text.collect(out);
            o_text.collect(out);
            ffn1_traj.collect(out);
            ffn2_traj.collect(out);
            ffn1_text.collect(out);
            ffn2_text.collect(out);
        }
    };

    /// Sinusoidal features of the scalar timestep, width model_dim.
    Tensor timestep_features(double t) const {
        const std::size_t D = cfg_.model_dim, half = D / 2;
        Tensor out({1, D});
        for (std::size_t j = 0; j < half; ++j) {
            const double freq =
                std::exp(-std::log(10000.0) * double(j) / double(std::max<std::size_t>(1, half)));
            out.data[j] = T(std::sin(t * freq * 1000.0));
            out.data[half + j] = T(std::cos(t * freq * 1000.0));
        }
        return out;
    }

    FlowConfig cfg_;
    mutable LinearT<T> in_proj_, text_proj_, t_mlp1_, t_mlp2_, final_mod_, head_;
    mutable std::vector<Block> blocks_;
    bool has_stats_ = false;
    Tensor stats_mu0_, stats_sigma0_, stats_mut_, stats_sigmat_;
};

using FlowModel = FlowModelT<float>;

/// One streaming pass over the corpus through the trained VAE encoder.
inline CorpusStats compute_stats(const std::vector<DynamicMesh>& corpus, const DyMeshVae& vae) {
    StatsAccumulator acc;
    for (const auto& mesh : corpus) {
        const std::size_t n = std::min(vae.config().tokens, mesh.vert_count);
        const EncodedMesh enc = vae.encode(mesh, n);
        acc.add_shape_tokens(enc.v0_tokens);
        acc.add_latents(enc.mu);
    }
    return acc.finish();
}

/// Full inference path: encode the static mesh's shape, sample a trajectory
/// latent with the flow model, decode, and anchor frame 0 to the input
/// vertices exactly.
template <class T>
DynamicMesh animate(const DynamicMesh& first_frame, const std::string& prompt,
                    const DyMeshVaeT<T>& vae, const FlowModelT<T>& flow,
                    const TextEmbedder& embedder, std::uint64_t rng_seed) {
    if (first_frame.frames != 1)
        throw std::invalid_argument("animate: input must have exactly one frame");
    const VaeConfig& vcfg = vae.config();

    // Tile the single frame into a static sequence so the shape path of the
    // encoder sees zero trajectories.
    DynamicMesh static_mesh = first_frame;
    static_mesh.frames = vcfg.frames;
    static_mesh.vertices.resize(vcfg.frames * first_frame.vert_count * 3);
    for (std::size_t t = 1; t < vcfg.frames; ++t)
        std::copy_n(first_frame.frame(0), first_frame.vert_count * 3, static_mesh.frame(t));

    const std::size_t n = inference_token_count(vcfg, first_frame.vert_count);
    const auto enc = vae.encode(static_mesh, n);

    const TensorT<T> text = embedder.embed(prompt).tokens.template cast<T>();
    const TensorT<T> uncond = embedder.embed("").tokens.template cast<T>();
    const TensorT<T> z = flow.sample(enc.v0_tokens, text, uncond, rng_seed);

    const TensorT<T> traj = vae.decode(enc.v0_full, {enc.v0_tokens, z});
    DynamicMesh out = vae.assemble(static_mesh, traj);
    std::copy_n(first_frame.frame(0), first_frame.vert_count * 3, out.frame(0));
    return out;
}

}  // namespace dymesh
