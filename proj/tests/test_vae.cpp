#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <vector>

#include "dymesh/checkpoint.hpp"
#include "dymesh/dataset.hpp"
#include "dymesh/synth.hpp"
#include "dymesh/vae.hpp"

using namespace dymesh;

namespace {

VaeConfig tiny_config() {
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

DynamicMesh tiny_mesh(std::uint64_t seed, std::size_t n = 12, std::size_t frames = 3) {
    Rng rng(seed);
    return synth::random_mesh(rng, n, n + 4, frames, 0.2);
}

}  // namespace

TEST_CASE("kl loss closed form hits the worked values") {
    Tensor mu0 = Tensor::zeros({4, 8});
    Tensor one = Tensor::full({4, 8}, 1.0f);
    CHECK(kl_loss(mu0, one) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(kl_loss(one, one) == doctest::Approx(1.0).epsilon(1e-9));

    Rng rng(1);
    Tensor mu({3, 5}), sg({3, 5});
    for (auto& v : mu.data) v = float(rng.uniform(-2.0, 2.0));
    for (auto& v : sg.data) v = float(rng.uniform(0.1, 2.0));
    double want = 0;
    for (std::size_t i = 0; i < mu.data.size(); ++i) {
        const double m = mu.data[i], s = sg.data[i];
        want += m * m + s * s - std::log(s * s);
    }
    want /= 2.0 * mu.data.size();
    CHECK(kl_loss(mu, sg) == doctest::Approx(want).epsilon(1e-6));
}

TEST_CASE("rec loss closed form hits the worked values") {
    Tensor a = Tensor::zeros({1, 48});
    Tensor b = Tensor::full({1, 48}, 0.1f);
    CHECK(rec_loss(a, a) == 0.0);
    CHECK(rec_loss(a, b) == doctest::Approx(0.48).epsilon(1e-6));

    Rng rng(2);
    Tensor p({5, 9}), t({5, 9});
    for (auto& v : p.data) v = float(rng.uniform(-1.0, 1.0));
    for (auto& v : t.data) v = float(rng.uniform(-1.0, 1.0));
    double want = 0;
    for (std::size_t i = 0; i < p.data.size(); ++i) {
        const double d = double(p.data[i]) - double(t.data[i]);
        want += d * d;
    }
    want /= 5.0;
    CHECK(rec_loss(p, t) == doctest::Approx(want).epsilon(1e-6));
}

TEST_CASE("graph losses agree with the closed-form oracles") {
    const VaeConfig cfg = tiny_config();
    DyMeshVaeT<double> vae(cfg, 5);
    const DynamicMesh m = tiny_mesh(3);
    GraphT<double> g;
    TensorT<double> eps = TensorT<double>::zeros({4, 3});
    auto loss = vae.loss_nodes(g, m, 4, eps);

    // recompute from the encoder outputs via the free-function oracles
    GraphT<double> g2;
    auto enc = vae.encode_nodes(g2, m, 4);
    TensorT<double> mu = g2.value(enc.mu);
    TensorT<double> sigma = g2.value(enc.hlv);
    for (auto& v : sigma.data) v = std::exp(v);
    const double kl_want = kl_loss(mu, sigma);
    CHECK(g.value(loss.kl).data[0] == doctest::Approx(kl_want).epsilon(1e-9));

    LatentPairT<double> pair;
    pair.v0_tokens = g2.value(enc.v0_tokens);
    pair.z = mu;  // eps = 0 -> z = mu
    TensorT<double> pred = vae.decode(g2.value(enc.v0_full), pair);
    const TrajectoryDecomposition dec = decompose(m);
    TensorT<double> target = trajectories_rowmajor<double>(dec.vt, cfg.frames, m.vert_count);
    CHECK(g.value(loss.rec).data[0] ==
          doctest::Approx(rec_loss(pred, target)).epsilon(1e-9));
    CHECK(g.value(loss.total).data[0] ==
          doctest::Approx(g.value(loss.rec).data[0] +
                          cfg.kl_weight * g.value(loss.kl).data[0])
              .epsilon(1e-12));
}

TEST_CASE("sample_latent: degenerate sigma, determinism, monte carlo mean") {
    EncodedMesh enc;
    enc.v0_tokens = Tensor::zeros({2, 4});
    enc.mu = Tensor::full({2, 2}, 0.7f);
    enc.sigma = Tensor::zeros({2, 2});
    auto p = DyMeshVae::sample_latent(enc, 9);
    for (float v : p.z.data) CHECK(v == 0.7f);

    enc.sigma = Tensor::full({2, 2}, 0.5f);
    auto p1 = DyMeshVae::sample_latent(enc, 42);
    auto p2 = DyMeshVae::sample_latent(enc, 42);
    CHECK(p1.z.data == p2.z.data);
    auto p3 = DyMeshVae::sample_latent(enc, 43);
    CHECK(p1.z.data != p3.z.data);

    const int trials = 10000;
    std::vector<double> mean(4, 0.0);
    for (int s = 0; s < trials; ++s) {
        auto ps = DyMeshVae::sample_latent(enc, 1000 + s);
        for (int i = 0; i < 4; ++i) mean[i] += ps.z.data[i];
    }
    const double bound = 3.0 * 0.5 / std::sqrt(double(trials));
    for (int i = 0; i < 4; ++i) CHECK(std::abs(mean[i] / trials - 0.7) < bound);
}

TEST_CASE("encode is deterministic and n=N keeps all rows") {
    const VaeConfig cfg = tiny_config();
    DyMeshVae vae(cfg, 7);
    const DynamicMesh m = tiny_mesh(8, 10);
    auto e1 = vae.encode(m, 10);
    auto e2 = vae.encode(m, 10);
    CHECK(e1.mu.data == e2.mu.data);
    CHECK(e1.sigma.data == e2.sigma.data);
    CHECK(e1.mu.rows() == 10);
    for (float s : e1.sigma.data) CHECK(s > 0.0f);
    CHECK(e1.fps.indices.size() == 10);
}

TEST_CASE("topology-aware features of one component ignore the other component") {
    const VaeConfig cfg = tiny_config();
    DyMeshVae vae(cfg, 11);
    DynamicMesh m = synth::articulated_pair(4, 3);
    const std::size_t per = m.vert_count / 2;

    DynamicMesh shifted = m;
    for (std::size_t t = 0; t < m.frames; ++t)
        for (std::size_t v = per; v < m.vert_count; ++v)
            for (int c = 0; c < 3; ++c) shifted.frame(t)[v * 3 + c] += float(2.0 + c);

    auto ea = vae.encode(m, 4);
    auto eb = vae.encode(shifted, 4);
    for (std::size_t v = 0; v < per; ++v)
        for (std::size_t c = 0; c < cfg.hidden_dim; ++c)
            CHECK(ea.v0_full.at(v, c) == eb.v0_full.at(v, c));
}

TEST_CASE("fresh decoder with z=0 outputs exactly zero trajectories") {
    const VaeConfig cfg = tiny_config();
    DyMeshVae vae(cfg, 13);
    const DynamicMesh m = tiny_mesh(14);
    auto enc = vae.encode(m, 4);
    LatentPair pair;
    pair.v0_tokens = enc.v0_tokens;
    pair.z = Tensor::zeros({4, cfg.latent_channels});
    Tensor out = vae.decode(enc.v0_full, pair);
    for (float v : out.data) CHECK(v == 0.0f);
}

TEST_CASE("single token: full-resolution attention weights are exactly one") {
    const VaeConfig cfg = tiny_config();
    DyMeshVae vae(cfg, 17);
    const DynamicMesh m = tiny_mesh(19);
    const DynamicMesh rec = vae.reconstruct(m, 1);
    CHECK(rec.vert_count == m.vert_count);
    CHECK(rec.frames == cfg.frames);
}

TEST_CASE("reconstruct passes faces through and posterior mean ignores the seed") {
    const VaeConfig cfg = tiny_config();
    DyMeshVae vae(cfg, 19);
    // the output head is zero-initialized; give it weight so sampled latents
    // actually reach the output
    Rng hr(3);
    for (auto* p : vae.params())
        if (p->name == "dec.out.weight")
            for (auto& v : p->value.data) v = float(hr.uniform(-0.3, 0.3));
    const DynamicMesh m = tiny_mesh(23);
    const DynamicMesh r1 = vae.reconstruct(m, 4, DyMeshVae::ReconstructMode::PosteriorMean, 1);
    const DynamicMesh r2 = vae.reconstruct(m, 4, DyMeshVae::ReconstructMode::PosteriorMean, 2);
    CHECK(r1.faces == m.faces);
    CHECK(r1.vertices == r2.vertices);
    const DynamicMesh s1 = vae.reconstruct(m, 4, DyMeshVae::ReconstructMode::Sampled, 1);
    const DynamicMesh s2 = vae.reconstruct(m, 4, DyMeshVae::ReconstructMode::Sampled, 2);
    CHECK(s1.vertices != s2.vertices);
}

TEST_CASE("decoder output row i depends only on row i of the full queries") {
    const VaeConfig cfg = tiny_config();
    DyMeshVae vae(cfg, 23);
    const DynamicMesh m = tiny_mesh(29, 10);
    auto enc = vae.encode(m, 4);
    LatentPair pair{enc.v0_tokens, enc.mu};
    Tensor base = vae.decode(enc.v0_full, pair);

    Tensor perm_q = enc.v0_full;
    std::vector<std::size_t> perm{9, 3, 5, 0, 7, 1, 8, 2, 6, 4};
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t c = 0; c < cfg.hidden_dim; ++c)
            perm_q.at(i, c) = enc.v0_full.at(perm[i], c);
    Tensor permuted = vae.decode(perm_q, pair);
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t c = 0; c < permuted.cols(); ++c)
            CHECK(permuted.at(i, c) == base.at(perm[i], c));
}

TEST_CASE("mean reduction: two half-weighted passes equal one full pass bitwise") {
    const VaeConfig cfg = tiny_config();
    DyMeshVae vae(cfg, 29);
    const DynamicMesh m = tiny_mesh(31);
    Tensor eps({4, cfg.latent_channels});
    Rng rng(77);
    for (auto& v : eps.data) v = float(rng.normal());

    auto params = vae.params();
    for (auto* p : params) p->zero_grad();
    {
        Graph g;
        auto loss = vae.loss_nodes(g, m, 4, eps);
        g.backward(loss.total);
    }
    std::vector<std::vector<float>> full;
    for (auto* p : params) full.push_back(p->grad.data);

    for (auto* p : params) p->zero_grad();
    for (int rep = 0; rep < 2; ++rep) {
        Graph g;
        auto loss = vae.loss_nodes(g, m, 4, eps);
        g.backward(g.scale(loss.total, 0.5f));
    }
    for (std::size_t i = 0; i < params.size(); ++i) CHECK(params[i]->grad.data == full[i]);
}

TEST_CASE("zero kl weight makes the total equal the reconstruction term") {
    VaeConfig cfg = tiny_config();
    cfg.kl_weight = 0.0;
    DyMeshVae vae(cfg, 31);
    const DynamicMesh m = tiny_mesh(37);
    Graph g;
    auto loss = vae.loss_nodes(g, m, 4, Tensor::zeros({4, cfg.latent_channels}));
    CHECK(g.value(loss.total).data[0] == g.value(loss.rec).data[0]);
}

TEST_CASE("short overfit run decreases the reconstruction loss") {
    VaeConfig cfg = tiny_config();
    cfg.hidden_dim = 16;
    cfg.tokens = 16;  // full coverage of the 16-vertex fixture
    DyMeshVae vae(cfg, 37);
    const DynamicMesh m = tiny_mesh(41, 16);
    Adam opt(vae.params(), 3e-3);
    Rng noise(5);
    double first = 0, last = 0;
    for (int s = 0; s < 200; ++s) {
        auto rep = vae.train_step({&m}, opt, noise);
        if (s == 0) first = rep.rec;
        last = rep.rec;
        CHECK(std::isfinite(rep.total));
    }
    CHECK(last < first * 0.5);
}

TEST_CASE("full loss gradients match central finite differences at h=1e-3") {
    const VaeConfig cfg = tiny_config();
    DyMeshVaeT<double> vae(cfg, 41);
    const DynamicMesh m = tiny_mesh(43, 12);
    TensorT<double> eps({4, cfg.latent_channels});
    Rng rng(6);
    for (auto& v : eps.data) v = rng.normal();

    auto params = vae.params();
    for (auto* p : params) p->zero_grad();
    double base;
    {
        GraphT<double> g;
        auto loss = vae.loss_nodes(g, m, 4, eps);
        base = g.value(loss.total).data[0];
        g.backward(loss.total);
    }
    CHECK(std::isfinite(base));
    const double h = 1e-3;
    double worst = 0;
    for (auto* p : params) {
        for (std::size_t i = 0; i < p->value.data.size(); ++i) {
            const double keep = p->value.data[i];
            p->value.data[i] = keep + h;
            GraphT<double> gp;
            const double fp = gp.value(vae.loss_nodes(gp, m, 4, eps).total).data[0];
            p->value.data[i] = keep - h;
            GraphT<double> gm;
            const double fm = gm.value(vae.loss_nodes(gm, m, 4, eps).total).data[0];
            p->value.data[i] = keep;
            const double fd = (fp - fm) / (2 * h);
            const double an = p->grad.data[i];
            const double rel =
                std::abs(an - fd) / std::max(1e-8, std::max(std::abs(an), std::abs(fd)));
            worst = std::max(worst, rel);
            if (rel >= 1e-3) {
                CAPTURE(p->name);
                CAPTURE(i);
            }
            REQUIRE(rel < 1e-3);
        }
    }
    MESSAGE("worst relative gradient error: " << worst);
}

TEST_CASE("checkpoint round trip restores parameters bit-exactly") {
    const VaeConfig cfg = tiny_config();
    DyMeshVae a(cfg, 43), b(cfg, 44);
    const std::string path = "test_vae_ckpt.bin";
    ckpt::save(path, a.params());
    ckpt::load(path, b.params());
    auto pa = a.params(), pb = b.params();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i]->name == pb[i]->name);
        CHECK(pa[i]->value.data == pb[i]->value.data);
    }
    std::remove(path.c_str());
}

TEST_CASE("padded batches are invisible: unpadded items round trip bitwise") {
    Rng rng(91);
    const VaeConfig cfg = tiny_config();
    DyMeshVae vae(cfg, 47);
    for (int c = 0; c < 10; ++c) {
        DynamicMesh a = synth::random_mesh(rng, 8 + rng.below(8), 12, 3);
        DynamicMesh b = synth::random_mesh(rng, 8 + rng.below(20), 16, 3);
        PaddedBatch batch = pad_batch({a, b});
        DynamicMesh a2 = unpad_item(batch, 0);
        DynamicMesh b2 = unpad_item(batch, 1);
        CHECK(a2.vertices == a.vertices);
        CHECK(b2.faces == b.faces);
        auto ea = vae.encode(a, 4), ea2 = vae.encode(a2, 4);
        CHECK(ea.mu.data == ea2.mu.data);
    }
}
