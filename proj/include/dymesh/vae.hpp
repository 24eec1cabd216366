#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dymesh/checkpoint.hpp"
#include "dymesh/graph.hpp"
#include "dymesh/mesh.hpp"
#include "dymesh/nn.hpp"
#include "dymesh/rng.hpp"
#include "dymesh/tensor.hpp"

namespace dymesh {

struct VaeConfig {
    std::size_t hidden_dim = 512;
    std::size_t latent_channels = 32;  // 32 for T=16, 64 for T=32
    std::size_t encoder_layers = 8;
    std::size_t decoder_blocks = 8;
    std::size_t tokens = 512;
    std::size_t frames = 16;
    double kl_weight = 0.001;
    double learning_rate = 1e-4;

    int pe0_bands = 8;
    int pet_bands = 4;
    bool pe_include_input = true;

    MaskMode mask_mode = MaskMode::NegInf;

    // Ablation toggles.
    bool use_adj = true;
    bool use_pe0 = true;
    bool use_pet = true;
    bool sep_attn = true;
    bool emb_fps = true;

    std::size_t pe0_width() const {
        return use_pe0 ? 3 * (2 * std::size_t(pe0_bands) + (pe_include_input ? 1 : 0)) : 3;
    }
    std::size_t pet_width() const {
        const std::size_t flat = frames * 3;
        return use_pet ? flat * (2 * std::size_t(pet_bands) + (pe_include_input ? 1 : 0)) : flat;
    }

    void validate() const {
        if (hidden_dim == 0 || latent_channels == 0 || encoder_layers == 0 ||
            decoder_blocks == 0 || tokens == 0 || frames == 0)
            throw std::invalid_argument("vae config: all extents must be positive");
        if (kl_weight < 0) throw std::invalid_argument("vae config: kl_weight must be >= 0");
    }
};

/// Token budget used at inference: min(tokens, N/8), at least one.
inline std::size_t inference_token_count(const VaeConfig& cfg, std::size_t n_verts) {
    return std::max<std::size_t>(1, std::min(cfg.tokens, n_verts / 8));
}

/// Flattens T x N x 3 relative trajectories into the N x (T*3) layout the
/// decoder predicts (per vertex, frames in order).
template <class T>
TensorT<T> trajectories_rowmajor(const std::vector<float>& vt, std::size_t frames,
                                 std::size_t n_verts) {
    TensorT<T> out({n_verts, frames * 3});
    for (std::size_t t = 0; t < frames; ++t)
        for (std::size_t i = 0; i < n_verts; ++i)
            for (std::size_t c = 0; c < 3; ++c)
                out.data[i * frames * 3 + t * 3 + c] = T(vt[(t * n_verts + i) * 3 + c]);
    return out;
}

template <class T>
struct EncodedMeshT {
    TensorT<T> v0_full;   // N x d topology-aware features
    TensorT<T> v0_tokens; // n x d sampled features
    TensorT<T> mu;        // n x C
    TensorT<T> sigma;     // n x C, strictly positive
    FpsSelection fps;
};

using EncodedMesh = EncodedMeshT<float>;

template <class T>
struct LatentPairT {
    TensorT<T> v0_tokens;
    TensorT<T> z;
};

using LatentPair = LatentPairT<float>;

/// KL term of Eq-style closed form: (1/(2nC)) sum(mu^2 + sigma^2 - log sigma^2).
/// Differs from the standard KL by a constant -1/2; gradients are identical.
template <class T>
T kl_loss(const TensorT<T>& mu, const TensorT<T>& sigma) {
    if (!mu.same_shape(sigma)) throw std::invalid_argument("kl: shape mismatch");
    double acc = 0;
    for (std::size_t i = 0; i < mu.data.size(); ++i) {
        const double s = double(sigma.data[i]);
        if (s <= 0) throw std::domain_error("kl: sigma must be positive");
        acc += double(mu.data[i]) * double(mu.data[i]) + s * s - std::log(s * s);
    }
    return T(acc / (2.0 * double(mu.data.size())));
}

/// Mean over vertices of the squared channel-space distance.
template <class T>
T rec_loss(const TensorT<T>& pred, const TensorT<T>& target) {
    if (!pred.same_shape(target)) throw std::invalid_argument("rec loss: shape mismatch");
    double acc = 0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const double d = double(pred.data[i]) - double(target.data[i]);
        acc += d * d;
    }
    return T(acc / double(pred.rows()));
}

template <class T>
class DyMeshVaeT {
  public:
    using Tensor = TensorT<T>;
    using Graph = GraphT<T>;

    DyMeshVaeT(VaeConfig cfg, std::uint64_t init_seed) : cfg_(std::move(cfg)) {
        cfg_.validate();
        Rng rng = Rng(init_seed).stream("vae-init");
        const std::size_t d = cfg_.hidden_dim, C = cfg_.latent_channels;
        embed0_.init("enc.embed0", cfg_.pe0_width(), d, rng);
        embed_t_.init("enc.embedT", cfg_.pet_width(), d, rng);
        attn0_.init("enc.attn0", d, rng);
        const std::size_t enc_qk = cfg_.sep_attn ? d : 2 * d;
        enc_layers_.resize(cfg_.encoder_layers);
        for (std::size_t i = 0; i < enc_layers_.size(); ++i)
            enc_layers_[i].init("enc.layer" + std::to_string(i), enc_qk, d, d, d, rng);
        head_mu_.init("enc.mu", d, C, rng);
        head_hlv_.init("enc.hlv", d, C, rng);
        const std::size_t dec_qk = cfg_.sep_attn ? d : d + C;
        dec_blocks_.resize(cfg_.decoder_blocks);
        for (std::size_t i = 0; i < dec_blocks_.size(); ++i)
            dec_blocks_[i].init("dec.block" + std::to_string(i), dec_qk, d, d, C, rng);
        head_out_.init("dec.out", C, cfg_.frames * 3, rng, /*zero_init=*/true);
    }

    const VaeConfig& config() const { return cfg_; }

    std::vector<ParameterT<T>*> params() {
        std::vector<ParameterT<T>*> out;
        embed0_.collect(out);
        embed_t_.collect(out);
        attn0_.collect(out);
        for (auto& l : enc_layers_) l.collect(out);
        head_mu_.collect(out);
        head_hlv_.collect(out);
        for (auto& b : dec_blocks_) b.collect(out);
        head_out_.collect(out);
        return out;
    }

    struct EncoderNodes {
        int v0_full = -1;
        int v0_tokens = -1;
        int vt_tokens = -1;
        int mu = -1;
        int hlv = -1;  // half-log-variance; sigma = exp(hlv)
        FpsSelection fps;
    };

    /// Records the encoder on the given graph. n_tokens must be in [1, N].
    EncoderNodes encode_nodes(Graph& g, const DynamicMesh& mesh, std::size_t n_tokens) const {
        validate_mesh(mesh);
        const std::size_t N = mesh.vert_count;
        if (n_tokens < 1 || n_tokens > N)
            throw std::invalid_argument("encode: token count out of range");

        const TrajectoryDecomposition dec = decompose(mesh);
        Tensor raw0({N, 3});
        for (std::size_t i = 0; i < N * 3; ++i) raw0.data[i] = T(dec.v0[i]);

        Tensor pe0 = cfg_.use_pe0
                         ? fourier_encode(raw0, FourierEncoding{cfg_.pe0_bands,
                                                                cfg_.pe_include_input})
                         : raw0;
        Tensor flat_t = trajectories_rowmajor<T>(dec.vt, cfg_.frames, N);
        Tensor pet = cfg_.use_pet
                         ? fourier_encode(flat_t, FourierEncoding{cfg_.pet_bands,
                                                                  cfg_.pe_include_input})
                         : flat_t;

        AdjacencyMask mask;
        if (cfg_.use_adj) mask = build_adjacency(mesh.faces, N);

        // Eq. 2: topology-aware features of the initial frame.
        const int h0 = embed0_.apply(g, g.input(std::move(pe0)));
        const int v0_full =
            attn0_.apply(g, h0, cfg_.use_adj ? &mask : nullptr, cfg_.mask_mode);
        const int ht = embed_t_.apply(g, g.input(std::move(pet)));

        EncoderNodes out;
        out.v0_full = v0_full;
        if (cfg_.emb_fps) {
            const auto& feat = g.value(v0_full);
            out.fps = farthest_point_sampling(feat.data.data(), N, feat.cols(), n_tokens);
        } else {
            out.fps = farthest_point_sampling(raw0.data.data(), N, 3, n_tokens);
        }

        int a = g.gather_rows(v0_full, out.fps.indices);
        int b = g.gather_rows(ht, out.fps.indices);
        for (auto& layer : enc_layers_) {
            int q_in = a, k_in = v0_full;
            if (!cfg_.sep_attn) {
                q_in = g.concat_cols(a, b);
                k_in = g.concat_cols(v0_full, ht);
            }
            std::tie(a, b) = layer.apply(g, q_in, k_in, v0_full, ht, a, b);
        }
        out.v0_tokens = a;
        out.vt_tokens = b;
        out.mu = head_mu_.apply(g, b);
        out.hlv = head_hlv_.apply(g, b);
        return out;
    }

    /// Records the decoder: K shared-map blocks over the sampled tokens,
    /// then the residual-free full-resolution cross attention and the
    /// output head mapping channels to T*3.
    int decode_nodes(Graph& g, int v0_full, int v0_tokens, int z) const {
        int a = v0_tokens;
        for (auto& block : dec_blocks_) {
            int qk = cfg_.sep_attn ? a : g.concat_cols(a, z);
            std::tie(a, z) = block.apply(g, qk, qk, a, z, a, z);
        }
        const int attn = g.softmax_rows(
            g.scale(g.matmul_nt(v0_full, a), T(1) / std::sqrt(T(cfg_.hidden_dim))));
        const int rec = g.matmul(attn, z);
        return head_out_.apply(g, rec);
    }

    EncodedMeshT<T> encode(const DynamicMesh& mesh, std::size_t n_tokens) const {
        Graph g;
        auto nodes = encode_nodes(g, mesh, n_tokens);
        EncodedMeshT<T> enc;
        enc.v0_full = g.value(nodes.v0_full);
        enc.v0_tokens = g.value(nodes.v0_tokens);
        enc.mu = g.value(nodes.mu);
        enc.sigma = g.value(nodes.hlv);
        for (auto& v : enc.sigma.data) v = std::exp(v);
        enc.fps = nodes.fps;
        return enc;
    }

    static LatentPairT<T> sample_latent(const EncodedMeshT<T>& enc, std::uint64_t rng_seed) {
        Rng rng = Rng(rng_seed).stream("vae-latent");
        LatentPairT<T> pair;
        pair.v0_tokens = enc.v0_tokens;
        pair.z = enc.mu;
        for (std::size_t i = 0; i < pair.z.data.size(); ++i)
            pair.z.data[i] += enc.sigma.data[i] * T(rng.normal());
        return pair;
    }

    Tensor decode(const Tensor& v0_full, const LatentPairT<T>& pair) const {
        Graph g;
        const int out = decode_nodes(g, g.input(v0_full), g.input(pair.v0_tokens),
                                     g.input(pair.z));
        return g.value(out);
    }

    enum class ReconstructMode { PosteriorMean, Sampled };

    DynamicMesh reconstruct(const DynamicMesh& mesh, std::size_t n_tokens,
                            ReconstructMode mode = ReconstructMode::PosteriorMean,
                            std::uint64_t rng_seed = 0) const {
        const auto enc = encode(mesh, n_tokens);
        LatentPairT<T> pair;
        if (mode == ReconstructMode::Sampled) {
            pair = sample_latent(enc, rng_seed);
        } else {
            pair.v0_tokens = enc.v0_tokens;
            pair.z = enc.mu;
        }
        const Tensor traj = decode(enc.v0_full, pair);
        return assemble(mesh, traj);
    }

    /// Rebuilds a dynamic mesh from predicted N x (T*3) relative trajectories
    /// plus the source mesh's initial frame and faces.
    DynamicMesh assemble(const DynamicMesh& source, const Tensor& traj) const {
        const std::size_t N = source.vert_count, Tn = cfg_.frames;
        if (traj.rows() != N || traj.cols() != Tn * 3)
            throw std::invalid_argument("assemble: trajectory shape mismatch");
        DynamicMesh out;
        out.faces = source.faces;
        out.frames = Tn;
        out.vert_count = N;
        out.caption = source.caption;
        out.vertices.resize(Tn * N * 3);
        const float* v0 = source.frame(0);
        for (std::size_t t = 0; t < Tn; ++t)
            for (std::size_t i = 0; i < N; ++i)
                for (std::size_t c = 0; c < 3; ++c)
                    out.vertices[(t * N + i) * 3 + c] =
                        v0[i * 3 + c] + float(traj.data[i * Tn * 3 + t * 3 + c]);
        // Frame 0 offsets are exactly zero only for a perfect model; the
        // reconstruction keeps whatever the decoder produced.
        return out;
    }

    struct LossNodes {
        int total = -1;
        int rec = -1;
        int kl = -1;
    };

    /// Records L_dvae = L_rec + gamma * L_kl for one mesh, using the provided
    /// standard-normal draw for the reparameterized latent sample.
    LossNodes loss_nodes(Graph& g, const DynamicMesh& mesh, std::size_t n_tokens,
                         const Tensor& epsilon) const {
        auto enc = encode_nodes(g, mesh, n_tokens);
        const int sigma = g.exp(enc.hlv);
        const int z = g.add(enc.mu, g.mul(sigma, g.input(epsilon)));
        const int pred = decode_nodes(g, enc.v0_full, enc.v0_tokens, z);

        const TrajectoryDecomposition dec = decompose(mesh);
        Tensor target = trajectories_rowmajor<T>(dec.vt, cfg_.frames, mesh.vert_count);

        LossNodes out;
        out.rec = g.scale(g.sum_all(g.square(g.sub(pred, g.input(std::move(target))))),
                          T(1) / T(mesh.vert_count));
        // (1/(2nC)) sum(mu^2 + exp(2h) - 2h)
        const int two_h = g.scale(enc.hlv, T(2));
        const int kl_terms = g.sub(g.add(g.square(enc.mu), g.exp(two_h)), two_h);
        out.kl = g.scale(g.sum_all(kl_terms), T(1) / T(2 * g.value(enc.mu).size()));
        out.total = g.add(out.rec, g.scale(out.kl, T(cfg_.kl_weight)));
        return out;
    }

    struct StepReport {
        double total = 0, rec = 0, kl = 0;
    };

    /// One optimizer step over a batch of meshes; the batch loss is the mean
    /// over items. Aborts on non-finite loss.
    StepReport train_step(const std::vector<const DynamicMesh*>& batch, AdamT<T>& opt,
                          Rng& noise_rng) {
        if (batch.empty()) throw std::invalid_argument("train step: empty batch");
        opt.zero_grad();
        StepReport rep;
        const T inv_b = T(1) / T(batch.size());
        for (const auto* mesh : batch) {
            const std::size_t n = std::min(cfg_.tokens, mesh->vert_count);
            Graph g;
            Tensor eps({n, cfg_.latent_channels});
            for (auto& v : eps.data) v = T(noise_rng.normal());
            auto loss = loss_nodes(g, *mesh, n, eps);
            const int scaled = g.scale(loss.total, inv_b);
            g.backward(scaled);
            rep.total += double(g.value(loss.total).data[0]) / batch.size();
            rep.rec += double(g.value(loss.rec).data[0]) / batch.size();
            rep.kl += double(g.value(loss.kl).data[0]) / batch.size();
        }
        if (!std::isfinite(rep.total))
            throw std::runtime_error("train step: non-finite loss");
        opt.step();
        return rep;
    }

  private:
    VaeConfig cfg_;
    mutable LinearT<T> embed0_, embed_t_, head_mu_, head_hlv_, head_out_;
    mutable MaskedSelfAttentionT<T> attn0_;
    mutable std::vector<SharedMapCrossAttentionT<T>> enc_layers_;
    mutable std::vector<SharedMapCrossAttentionT<T>> dec_blocks_;
};

using DyMeshVae = DyMeshVaeT<float>;

}  // namespace dymesh
