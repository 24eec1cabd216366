#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "dymesh/eval.hpp"
#include "dymesh/flow.hpp"
#include "dymesh/vae.hpp"

namespace dymesh {

using json = nlohmann::json;

inline void to_json(json& j, const VaeConfig& c) {
    j = json{{"hidden_dim", c.hidden_dim},
             {"latent_channels", c.latent_channels},
             {"encoder_layers", c.encoder_layers},
             {"decoder_blocks", c.decoder_blocks},
             {"tokens", c.tokens},
             {"frames", c.frames},
             {"kl_weight", c.kl_weight},
             {"learning_rate", c.learning_rate},
             {"pe0_bands", c.pe0_bands},
             {"pet_bands", c.pet_bands},
             {"pe_include_input", c.pe_include_input},
             {"mask_mode", c.mask_mode == MaskMode::NegInf ? "neg_inf" : "literal_hadamard"},
             {"use_adj", c.use_adj},
             {"use_pe0", c.use_pe0},
             {"use_pet", c.use_pet},
             {"sep_attn", c.sep_attn},
             {"emb_fps", c.emb_fps}};
}

inline void from_json(const json& j, VaeConfig& c) {
    VaeConfig d;
    c.hidden_dim = j.value("hidden_dim", d.hidden_dim);
    c.latent_channels = j.value("latent_channels", d.latent_channels);
    c.encoder_layers = j.value("encoder_layers", d.encoder_layers);
    c.decoder_blocks = j.value("decoder_blocks", d.decoder_blocks);
    c.tokens = j.value("tokens", d.tokens);
    c.frames = j.value("frames", d.frames);
    c.kl_weight = j.value("kl_weight", d.kl_weight);
    c.learning_rate = j.value("learning_rate", d.learning_rate);
    c.pe0_bands = j.value("pe0_bands", d.pe0_bands);
    c.pet_bands = j.value("pet_bands", d.pet_bands);
    c.pe_include_input = j.value("pe_include_input", d.pe_include_input);
    const std::string mm = j.value("mask_mode", std::string("neg_inf"));
    if (mm == "neg_inf")
        c.mask_mode = MaskMode::NegInf;
    else if (mm == "literal_hadamard")
        c.mask_mode = MaskMode::LiteralHadamard;
    else
        throw std::invalid_argument("config: unknown mask_mode: " + mm);
    c.use_adj = j.value("use_adj", d.use_adj);
    c.use_pe0 = j.value("use_pe0", d.use_pe0);
    c.use_pet = j.value("use_pet", d.use_pet);
    c.sep_attn = j.value("sep_attn", d.sep_attn);
    c.emb_fps = j.value("emb_fps", d.emb_fps);
}

inline void to_json(json& j, const FlowConfig& c) {
    j = json{{"blocks", c.blocks},
             {"heads", c.heads},
             {"model_dim", c.model_dim},
             {"latent_channels", c.latent_channels},
             {"cond_dim", c.cond_dim},
             {"text_dim", c.text_dim},
             {"ffn_mult", c.ffn_mult},
             {"cfg_scale", c.cfg_scale},
             {"sample_steps", c.sample_steps},
             {"cond_drop_prob", c.cond_drop_prob},
             {"learning_rate", c.learning_rate}};
}

inline void from_json(const json& j, FlowConfig& c) {
    FlowConfig d;
    c.blocks = j.value("blocks", d.blocks);
    c.heads = j.value("heads", d.heads);
    c.model_dim = j.value("model_dim", d.model_dim);
    c.latent_channels = j.value("latent_channels", d.latent_channels);
    c.cond_dim = j.value("cond_dim", d.cond_dim);
    c.text_dim = j.value("text_dim", d.text_dim);
    c.ffn_mult = j.value("ffn_mult", d.ffn_mult);
    c.cfg_scale = j.value("cfg_scale", d.cfg_scale);
    c.sample_steps = j.value("sample_steps", d.sample_steps);
    c.cond_drop_prob = j.value("cond_drop_prob", d.cond_drop_prob);
    c.learning_rate = j.value("learning_rate", d.learning_rate);
}

inline void to_json(json& j, const AblationFlags& f) {
    j = json{{"use_adj", f.use_adj},
             {"use_pe0", f.use_pe0},
             {"use_pet", f.use_pet},
             {"sep_attn", f.sep_attn},
             {"emb_fps", f.emb_fps}};
}

inline void from_json(const json& j, AblationFlags& f) {
    AblationFlags d;
    f.use_adj = j.value("use_adj", d.use_adj);
    f.use_pe0 = j.value("use_pe0", d.use_pe0);
    f.use_pet = j.value("use_pet", d.use_pet);
    f.sep_attn = j.value("sep_attn", d.sep_attn);
    f.emb_fps = j.value("emb_fps", d.emb_fps);
}

template <class C>
C load_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    json j;
    is >> j;
    C c = j.get<C>();
    c.validate();
    return c;
}

/// Run manifests: a deterministic JSON document (sorted keys, fixed indent)
/// recording everything needed to re-run a command exactly.
inline void write_manifest(const std::string& path, const json& body) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("manifest: cannot write " + path);
    os << body.dump(2) << '\n';
}

}  // namespace dymesh
