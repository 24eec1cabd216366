#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "dymesh/config_json.hpp"
#include "dymesh/eval.hpp"
#include "dymesh/synth.hpp"

using namespace dymesh;

TEST_CASE("reconstruction error worked values and metric properties") {
    Rng rng(1);
    DynamicMesh gt = synth::random_mesh(rng, 10, 14, 4);
    CHECK(reconstruction_error(gt, gt) == 0.0);

    DynamicMesh shifted = gt;
    for (std::size_t t = 0; t < gt.frames; ++t)
        for (std::size_t v = 0; v < gt.vert_count; ++v) {
            shifted.frame(t)[v * 3] += 0.3f;
            shifted.frame(t)[v * 3 + 2] += 0.4f;
        }
    CHECK(reconstruction_error(shifted, gt) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(reconstruction_error(shifted, gt) ==
          doctest::Approx(reconstruction_error(gt, shifted)).epsilon(1e-12));
    CHECK(l2_sum_error(shifted, gt) ==
          doctest::Approx(0.5 * gt.frames * gt.vert_count).epsilon(1e-5));

    // random pair matches the scalar loop oracle
    DynamicMesh other = synth::random_mesh(rng, 10, 14, 4);
    double want = 0;
    for (std::size_t t = 0; t < 4; ++t) {
        double fs = 0;
        for (std::size_t v = 0; v < 10; ++v) {
            double d2 = 0;
            for (int c = 0; c < 3; ++c) {
                const double d =
                    double(gt.frame(t)[v * 3 + c]) - double(other.frame(t)[v * 3 + c]);
                d2 += d * d;
            }
            fs += std::sqrt(d2);
        }
        want += fs / 10.0;
    }
    want /= 4.0;
    CHECK(reconstruction_error(gt, other) == doctest::Approx(want).epsilon(1e-9));

    DynamicMesh small = synth::random_mesh(rng, 8, 10, 4);
    CHECK_THROWS_AS(reconstruction_error(gt, small), std::invalid_argument);
}

TEST_CASE("fps ratio sweep emits one row per mesh and ratio, skipping tiny ones") {
    VaeConfig cfg;
    cfg.hidden_dim = 8;
    cfg.latent_channels = 3;
    cfg.encoder_layers = 1;
    cfg.decoder_blocks = 1;
    cfg.tokens = 64;
    cfg.frames = 3;
    cfg.pe0_bands = 2;
    cfg.pet_bands = 1;
    DyMeshVae vae(cfg, 3);

    Rng rng(2);
    DynamicMesh big = synth::random_mesh(rng, 64, 90, 3);
    DynamicMesh small = synth::random_mesh(rng, 16, 20, 3);
    SweepResult res = fps_ratio_sweep(vae, {&big, &small});
    REQUIRE(res.entries.size() == 8);
    int skipped = 0;
    for (const auto& e : res.entries)
        if (e.skipped) ++skipped;
    CHECK(skipped == 1);  // 16/32 < 1

    std::string csv = res.to_csv();
    CHECK(csv.find("mesh_index,ratio,tokens") == 0);
    std::size_t lines = 0;
    std::istringstream is(csv);
    std::string line;
    while (std::getline(is, line)) ++lines;
    CHECK(lines == 9);  // header + 8 rows
    CHECK(csv.find("skipped") != std::string::npos);
}

TEST_CASE("ablation grid lists the six component configurations") {
    auto grid = ablation_grid();
    REQUIRE(grid.size() == 6);
    CHECK(grid[0].label() == "full");
    CHECK(grid[1].label() == "no-adj");
    CHECK(grid[2].label() == "no-pe0");
    CHECK(grid[3].label() == "no-pet");
    CHECK(grid[4].label() == "no-sep-attn");
    CHECK(grid[5].label() == "no-emb-fps");
}

TEST_CASE("ablation run is deterministic per seed and flags serialize verbatim") {
    VaeConfig base;
    base.hidden_dim = 8;
    base.latent_channels = 2;
    base.encoder_layers = 1;
    base.decoder_blocks = 1;
    base.tokens = 8;
    base.frames = 3;
    base.pe0_bands = 2;
    base.pet_bands = 1;
    Rng rng(4);
    DynamicMesh m1 = synth::random_mesh(rng, 10, 14, 3);
    DynamicMesh m2 = synth::random_mesh(rng, 12, 16, 3);
    std::vector<const DynamicMesh*> corpus{&m1, &m2};

    AblationFlags flags;
    flags.use_adj = false;
    auto a = ablation_run<float>(base, flags, corpus, 10, 9);
    auto b = ablation_run<float>(base, flags, corpus, 10, 9);
    CHECK(a.frame_avg_l2 == b.frame_avg_l2);
    CHECK(a.final_train_loss == b.final_train_loss);
    CHECK(a.flags.label() == "no-adj");

    json j = flags;
    AblationFlags back = j.get<AblationFlags>();
    CHECK(back.use_adj == flags.use_adj);
    CHECK(back.sep_attn == flags.sep_attn);
}

TEST_CASE("config json round trips both model configs") {
    VaeConfig vc;
    vc.hidden_dim = 24;
    vc.mask_mode = MaskMode::LiteralHadamard;
    vc.use_pet = false;
    json jv = vc;
    VaeConfig vback = jv.get<VaeConfig>();
    CHECK(vback.hidden_dim == 24);
    CHECK(vback.mask_mode == MaskMode::LiteralHadamard);
    CHECK(vback.use_pet == false);

    FlowConfig fc;
    fc.blocks = 3;
    fc.cfg_scale = 2.25;
    json jf = fc;
    FlowConfig fback = jf.get<FlowConfig>();
    CHECK(fback.blocks == 3);
    CHECK(fback.cfg_scale == 2.25);
}
