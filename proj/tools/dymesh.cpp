#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dymesh/checkpoint.hpp"
#include "dymesh/config_json.hpp"
#include "dymesh/dataset.hpp"
#include "dymesh/eval.hpp"
#include "dymesh/flow.hpp"
#include "dymesh/obj_export.hpp"
#include "dymesh/synth.hpp"
#include "dymesh/text_embed.hpp"
#include "dymesh/vae.hpp"

namespace fs = std::filesystem;
using namespace dymesh;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitMissing = 3;
constexpr int kExitNumeric = 4;

bool verbose() {
    const char* v = std::getenv("DYMESH_LOG");
    return v && std::string(v) != "0" && std::string(v) != "";
}

void log(const std::string& msg) {
    if (verbose()) std::cerr << "[dymesh] " << msg << "\n";
}

struct CliError {
    int code;
    std::string message;
};

json base_manifest(const std::string& command, std::uint64_t seed, int threads) {
    json j;
    j["command"] = command;
    j["seed"] = seed;
    j["threads"] = threads;
    return j;
}

template <class C>
C load_config_or_default(const std::string& path) {
    if (path.empty()) return C{};
    if (!fs::exists(path)) throw CliError{kExitInput, "config file not found: " + path};
    return load_config_file<C>(path);
}

void require_artifact(const std::string& path, const std::string& what) {
    if (!fs::exists(path)) throw CliError{kExitMissing, "missing " + what + ": " + path};
}

std::vector<std::string> sorted_dmb_files(const std::string& dir) {
    std::vector<std::string> files;
    if (!fs::is_directory(dir)) throw CliError{kExitInput, "not a directory: " + dir};
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".dmb")
            files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    return files;
}

std::vector<DynamicMesh> load_corpus(const std::string& dir) {
    std::vector<DynamicMesh> out;
    for (const auto& f : sorted_dmb_files(dir)) out.push_back(dmb_read(f));
    if (out.empty()) throw CliError{kExitInput, "no input sequences"};
    return out;
}

// Sources for dataset-build: either .dmb files in src_dir or synthetic specs
// of the form "name:count:frames" (e.g. "oscillating-sphere:4:32").
struct SourceAnim {
    std::string id;
    DynamicMesh mesh;
};

std::vector<SourceAnim> gather_sources(const std::string& src_dir,
                                       const std::vector<std::string>& synth_specs) {
    std::vector<SourceAnim> out;
    if (!src_dir.empty()) {
        for (const auto& f : sorted_dmb_files(src_dir))
            out.push_back({fs::path(f).stem().string(), dmb_read(f)});
    }
    for (const auto& spec : synth_specs) {
        const auto c1 = spec.find(':');
        const auto c2 = spec.find(':', c1 == std::string::npos ? c1 : c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw CliError{kExitInput, "bad synthetic spec (want name:count:frames): " + spec};
        const std::string name = spec.substr(0, c1);
        const std::size_t count = std::stoul(spec.substr(c1 + 1, c2 - c1 - 1));
        const std::size_t frames = std::stoul(spec.substr(c2 + 1));
        for (std::size_t v = 0; v < count; ++v) {
            SourceAnim a{name + "-" + std::to_string(v), synth::generate(name, frames, v)};
            a.mesh.caption = "a " + name + " in motion, variant " + std::to_string(v);
            out.push_back(std::move(a));
        }
    }
    if (out.empty()) throw CliError{kExitInput, "no input sequences"};
    return out;
}

int cmd_dataset_build(const std::string& src_dir, const std::vector<std::string>& synth_specs,
                      const std::string& out_dir, std::size_t window, std::uint64_t seed,
                      int threads) {
    auto sources = gather_sources(src_dir, synth_specs);
    fs::create_directories(out_dir);

    std::ofstream manifest(fs::path(out_dir) / "manifest.jsonl", std::ios::binary);
    if (!manifest) throw CliError{kExitInput, "cannot write manifest in " + out_dir};
    std::size_t kept = 0;
    std::vector<std::pair<std::string, std::size_t>> reject_counts;
    auto count_reject = [&](const std::string& reason) {
        for (auto& [r, c] : reject_counts)
            if (r == reason) {
                ++c;
                return;
            }
        reject_counts.push_back({reason, 1});
    };

    for (const auto& src : sources) {
        DynamicMesh merged = merge_duplicate_vertices(src.mesh);
        auto windows = slice_windows(merged, window);
        log(src.id + ": " + std::to_string(windows.size()) + " windows");
        for (std::size_t w = 0; w < windows.size(); ++w) {
            json row;
            row["source"] = src.id;
            row["window"] = w;
            DynamicMesh norm;
            std::string reason;
            try {
                norm = normalize_window(windows[w]);
            } catch (const MeshError&) {
                reason = "degenerate-frame0";
            }
            if (reason.empty()) {
                FilterResult fr = motion_filter(norm);
                if (!fr.keep) reason = fr.reason;
            }
            if (reason.empty()) {
                FilterResult fr = ratio_filter(norm);
                if (!fr.keep) reason = fr.reason;
            }
            row["N"] = windows[w].vert_count;
            row["M"] = windows[w].face_count();
            row["T"] = windows[w].frames;
            row["kept"] = reason.empty();
            row["reject_reason"] = reason;
            if (reason.empty()) {
                char name[128];
                std::snprintf(name, sizeof(name), "%s_w%03zu.dmb", src.id.c_str(), w);
                const std::string path = (fs::path(out_dir) / name).string();
                dmb_write(path, norm);
                row["path"] = std::string(name);
                ++kept;
            } else {
                row["path"] = "";
                count_reject(reason);
            }
            manifest << row.dump() << "\n";
        }
    }
    manifest.close();

    json run = base_manifest("dataset-build", seed, threads);
    run["window"] = window;
    run["sources"] = sources.size();
    run["kept"] = kept;
    json rejects = json::object();
    for (const auto& [r, c] : reject_counts) rejects[r] = c;
    run["rejected"] = rejects;
    run["manifest_hash"] = file_content_hash((fs::path(out_dir) / "manifest.jsonl").string());
    write_manifest((fs::path(out_dir) / "run_manifest.json").string(), run);

    std::cout << "kept " << kept << " windows\n";
    for (const auto& [r, c] : reject_counts) std::cout << "rejected " << c << " (" << r << ")\n";
    return kExitOk;
}

void write_loss_row(std::ofstream& csv, std::size_t step, double total, double rec, double kl) {
    csv << step << ',' << total << ',' << rec << ',' << kl << "\n";
    csv.flush();
}

int cmd_train_vae(const std::string& config_path, const std::string& data_dir,
                  const std::string& out_dir, const std::string& resume, std::size_t steps,
                  std::size_t batch_size, std::uint64_t seed, int threads) {
    VaeConfig cfg = load_config_or_default<VaeConfig>(config_path);
    cfg.validate();
    auto corpus = load_corpus(data_dir);
    for (const auto& m : corpus)
        if (m.frames != cfg.frames)
            throw CliError{kExitInput, "corpus frame count does not match config"};

    fs::create_directories(out_dir);
    DyMeshVae vae(cfg, seed);
    if (!resume.empty()) {
        require_artifact(resume, "checkpoint");
        ckpt::load(resume, vae.params());
    }
    Adam opt(vae.params(), cfg.learning_rate);
    Rng root(seed);
    Rng order = root.stream("vae-data");
    Rng noise = root.stream("vae-noise");

    const std::string ckpt_path = (fs::path(out_dir) / "vae.ckpt").string();
    std::ofstream csv(fs::path(out_dir) / "loss.csv");
    csv << "step,total,rec,kl\n";
    double last = 0;
    for (std::size_t s = 0; s < steps; ++s) {
        std::vector<const DynamicMesh*> batch;
        for (std::size_t b = 0; b < batch_size; ++b)
            batch.push_back(&corpus[order.below(corpus.size())]);
        DyMeshVae::StepReport rep;
        try {
            rep = vae.train_step(batch, opt, noise);
        } catch (const std::runtime_error& e) {
            // keep the last-good checkpoint already on disk
            std::cerr << "numerical failure at step " << s << ": " << e.what() << "\n";
            return kExitNumeric;
        }
        write_loss_row(csv, s, rep.total, rep.rec, rep.kl);
        last = rep.total;
        if ((s + 1) % 50 == 0 || s + 1 == steps) {
            ckpt::save(ckpt_path, vae.params());
            log("step " + std::to_string(s + 1) + " loss " + std::to_string(rep.total));
        }
    }

    json run = base_manifest("train-vae", seed, threads);
    run["config"] = cfg;
    run["steps"] = steps;
    run["batch"] = batch_size;
    run["corpus_size"] = corpus.size();
    run["final_loss"] = last;
    run["checkpoint"] = "vae.ckpt";
    run["checkpoint_hash"] = file_content_hash(ckpt_path);
    write_manifest((fs::path(out_dir) / "run_manifest.json").string(), run);
    std::cout << "final loss " << last << "\n";
    return kExitOk;
}

int cmd_compute_stats(const std::string& vae_config, const std::string& vae_ckpt,
                      const std::string& data_dir, const std::string& out_path,
                      std::uint64_t seed, int threads) {
    VaeConfig cfg = load_config_or_default<VaeConfig>(vae_config);
    require_artifact(vae_ckpt, "vae checkpoint");
    DyMeshVae vae(cfg, seed);
    ckpt::load(vae_ckpt, vae.params());
    auto corpus = load_corpus(data_dir);
    CorpusStats stats = compute_stats(corpus, vae);
    stats.save(out_path);

    json run = base_manifest("compute-stats", seed, threads);
    run["vae_checkpoint_hash"] = file_content_hash(vae_ckpt);
    run["corpus_size"] = corpus.size();
    run["stats"] = out_path;
    write_manifest(out_path + ".manifest.json", run);
    std::cout << "stats written to " << out_path << "\n";
    return kExitOk;
}

int cmd_train_flow(const std::string& flow_config, const std::string& vae_config,
                   const std::string& vae_ckpt, const std::string& stats_path,
                   const std::string& data_dir, const std::string& out_dir,
                   const std::string& embed_archive, std::size_t steps, std::size_t batch_size,
                   std::uint64_t seed, int threads) {
    FlowConfig fcfg = load_config_or_default<FlowConfig>(flow_config);
    VaeConfig vcfg = load_config_or_default<VaeConfig>(vae_config);
    fcfg.validate();
    require_artifact(vae_ckpt, "vae checkpoint");
    require_artifact(stats_path, "corpus stats");

    DyMeshVae vae(vcfg, seed);
    ckpt::load(vae_ckpt, vae.params());
    TextEmbedder embedder = embed_archive.empty()
                                ? TextEmbedder(fcfg.text_dim)
                                : TextEmbedder(EmbeddingArchive::load(embed_archive),
                                               fcfg.text_dim);

    auto corpus = load_corpus(data_dir);
    std::vector<FlowModel::TrainItem> items;
    for (const auto& mesh : corpus) {
        const std::size_t n = std::min(vcfg.tokens, mesh.vert_count);
        EncodedMesh enc = vae.encode(mesh, n);
        items.push_back({enc.v0_tokens, enc.mu,
                         embedder.embed(mesh.caption.value_or("")).tokens});
    }
    const Tensor uncond = embedder.embed("").tokens;

    fs::create_directories(out_dir);
    FlowModel flow(fcfg, seed);
    flow.set_stats(CorpusStats::load(stats_path));
    Adam opt(flow.params(), fcfg.learning_rate);
    Rng root(seed);
    Rng order = root.stream("flow-data");
    Rng noise = root.stream("flow-noise");

    const std::string ckpt_path = (fs::path(out_dir) / "flow.ckpt").string();
    std::ofstream csv(fs::path(out_dir) / "loss.csv");
    csv << "step,loss\n";
    double last = 0;
    for (std::size_t s = 0; s < steps; ++s) {
        std::vector<FlowModel::TrainItem> batch;
        for (std::size_t b = 0; b < batch_size; ++b)
            batch.push_back(items[order.below(items.size())]);
        FlowModel::StepReport rep;
        try {
            rep = flow.train_step(batch, uncond, opt, noise);
        } catch (const std::runtime_error& e) {
            std::cerr << "numerical failure at step " << s << ": " << e.what() << "\n";
            return kExitNumeric;
        }
        csv << s << ',' << rep.loss << "\n";
        csv.flush();
        last = rep.loss;
        if ((s + 1) % 50 == 0 || s + 1 == steps) {
            ckpt::save(ckpt_path, flow.params());
            log("step " + std::to_string(s + 1) + " loss " + std::to_string(rep.loss));
        }
    }

    json run = base_manifest("train-flow", seed, threads);
    run["flow_config"] = fcfg;
    run["vae_config"] = vcfg;
    run["steps"] = steps;
    run["batch"] = batch_size;
    run["corpus_size"] = corpus.size();
    run["final_loss"] = last;
    run["checkpoint"] = "flow.ckpt";
    run["checkpoint_hash"] = file_content_hash(ckpt_path);
    run["stats_hash"] = file_content_hash(stats_path);
    write_manifest((fs::path(out_dir) / "run_manifest.json").string(), run);
    std::cout << "final loss " << last << "\n";
    return kExitOk;
}

int cmd_animate(const std::string& mesh_path, const std::string& prompt,
                const std::string& vae_config, const std::string& vae_ckpt,
                const std::string& flow_config, const std::string& flow_ckpt,
                const std::string& stats_path, const std::string& embed_archive,
                const std::string& out_dir, std::uint64_t seed, int threads) {
    require_artifact(mesh_path, "input mesh");
    require_artifact(vae_ckpt, "vae checkpoint");
    require_artifact(flow_ckpt, "flow checkpoint");
    require_artifact(stats_path, "corpus stats");
    VaeConfig vcfg = load_config_or_default<VaeConfig>(vae_config);
    FlowConfig fcfg = load_config_or_default<FlowConfig>(flow_config);

    DyMeshVae vae(vcfg, seed);
    ckpt::load(vae_ckpt, vae.params());
    FlowModel flow(fcfg, seed);
    ckpt::load(flow_ckpt, flow.params());
    flow.set_stats(CorpusStats::load(stats_path));
    TextEmbedder embedder = embed_archive.empty()
                                ? TextEmbedder(fcfg.text_dim)
                                : TextEmbedder(EmbeddingArchive::load(embed_archive),
                                               fcfg.text_dim);

    DynamicMesh input = dmb_read(mesh_path);
    DynamicMesh first;
    first.faces = input.faces;
    first.frames = 1;
    first.vert_count = input.vert_count;
    first.vertices.assign(input.frame(0), input.frame(0) + input.vert_count * 3);
    first.caption = input.caption;

    DynamicMesh out = animate(first, prompt, vae, flow, embedder, seed);
    const bool finite = std::all_of(out.vertices.begin(), out.vertices.end(),
                                    [](float v) { return std::isfinite(v); });
    if (!finite) {
        std::cerr << "numerical failure: non-finite animation output\n";
        return kExitNumeric;
    }

    fs::create_directories(out_dir);
    const std::string dmb_path = (fs::path(out_dir) / "animation.dmb").string();
    dmb_write(dmb_path, out);
    export_obj_sequence(out, (fs::path(out_dir) / "frames").string());

    json run = base_manifest("animate", seed, threads);
    run["prompt"] = prompt;
    run["mesh"] = mesh_path;
    run["mesh_hash"] = file_content_hash(mesh_path);
    run["vae_checkpoint_hash"] = file_content_hash(vae_ckpt);
    run["flow_checkpoint_hash"] = file_content_hash(flow_ckpt);
    run["output"] = "animation.dmb";
    run["output_hash"] = file_content_hash(dmb_path);
    write_manifest((fs::path(out_dir) / "run_manifest.json").string(), run);
    std::cout << "animation written to " << dmb_path << "\n";
    return kExitOk;
}

int cmd_embed_import(const std::string& json_path, const std::string& out_path) {
    require_artifact(json_path, "embedding json");
    std::ifstream is(json_path);
    json j;
    is >> j;
    EmbeddingArchive arch;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& rows = it.value();
        if (!rows.is_array() || rows.empty() || !rows[0].is_array())
            throw CliError{kExitInput, "embedding for \"" + it.key() + "\" must be a 2D array"};
        Tensor m({rows.size(), rows[0].size()});
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != m.cols())
                throw CliError{kExitInput, "ragged embedding rows for \"" + it.key() + "\""};
            for (std::size_t c = 0; c < m.cols(); ++c) m.at(r, c) = rows[r][c].get<float>();
        }
        arch.put(it.key(), std::move(m));
    }
    arch.save(out_path);
    std::cout << "imported " << arch.size() << " embeddings\n";
    return kExitOk;
}

int cmd_eval_sweep(const std::string& vae_config, const std::string& vae_ckpt,
                   const std::string& data_dir, const std::string& out_csv, std::uint64_t seed,
                   int threads) {
    VaeConfig cfg = load_config_or_default<VaeConfig>(vae_config);
    require_artifact(vae_ckpt, "vae checkpoint");
    DyMeshVae vae(cfg, seed);
    ckpt::load(vae_ckpt, vae.params());
    auto corpus = load_corpus(data_dir);
    std::vector<const DynamicMesh*> ptrs;
    for (const auto& m : corpus) ptrs.push_back(&m);
    SweepResult res = fps_ratio_sweep(vae, ptrs);
    std::ofstream os(out_csv, std::ios::binary);
    os << res.to_csv();
    json run = base_manifest("eval-sweep", seed, threads);
    run["vae_checkpoint_hash"] = file_content_hash(vae_ckpt);
    run["corpus_size"] = corpus.size();
    write_manifest(out_csv + ".manifest.json", run);
    std::cout << res.to_csv();
    return kExitOk;
}

int cmd_eval_ablation(const std::string& vae_config, const std::string& data_dir,
                      const std::string& out_csv, std::size_t steps, std::uint64_t seed,
                      int threads) {
    VaeConfig base = load_config_or_default<VaeConfig>(vae_config);
    auto corpus = load_corpus(data_dir);
    std::vector<const DynamicMesh*> ptrs;
    for (const auto& m : corpus) ptrs.push_back(&m);

    std::ofstream os(out_csv, std::ios::binary);
    os << "label,use_adj,use_pe0,use_pet,sep_attn,emb_fps,final_train_loss,frame_avg_l2,l2_sum\n";
    json runs = json::array();
    for (const AblationFlags& flags : ablation_grid()) {
        AblationReport rep = ablation_run<float>(base, flags, ptrs, steps, seed);
        os << rep.flags.label() << ',' << flags.use_adj << ',' << flags.use_pe0 << ','
           << flags.use_pet << ',' << flags.sep_attn << ',' << flags.emb_fps << ','
           << rep.final_train_loss << ',' << rep.frame_avg_l2 << ',' << rep.l2_sum << "\n";
        json r;
        r["flags"] = flags;
        r["frame_avg_l2"] = rep.frame_avg_l2;
        r["l2_sum"] = rep.l2_sum;
        runs.push_back(r);
        log("ablation " + rep.flags.label() + " frame_avg_l2 " +
            std::to_string(rep.frame_avg_l2));
    }
    json run = base_manifest("eval-ablation", seed, threads);
    run["config"] = base;
    run["steps"] = steps;
    run["runs"] = runs;
    write_manifest(out_csv + ".manifest.json", run);
    std::cout << "ablation table written to " << out_csv << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dynamic mesh animation toolkit"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    int threads = 4;
    app.add_option("--seed", seed, "root random seed")->capture_default_str();
    app.add_option("--threads", threads, "worker thread cap")->capture_default_str();

    // dataset-build
    auto* ds = app.add_subcommand("dataset-build", "curate a training corpus");
    std::string ds_src, ds_out = "data";
    std::vector<std::string> ds_synth;
    std::size_t ds_window = 16;
    ds->add_option("--src", ds_src, "directory of source .dmb animations");
    ds->add_option("--synthetic", ds_synth, "synthetic generator spec name:count:frames");
    ds->add_option("--out", ds_out, "output directory")->capture_default_str();
    ds->add_option("--window", ds_window, "window length in frames")->capture_default_str();

    // train-vae
    auto* tv = app.add_subcommand("train-vae", "train the trajectory autoencoder");
    std::string tv_cfg, tv_data, tv_out = "vae_run", tv_resume;
    std::size_t tv_steps = 200, tv_batch = 2;
    tv->add_option("--config", tv_cfg, "vae config json");
    tv->add_option("--data", tv_data, "curated corpus directory")->required();
    tv->add_option("--out", tv_out, "output directory")->capture_default_str();
    tv->add_option("--resume", tv_resume, "checkpoint to resume from");
    tv->add_option("--steps", tv_steps, "optimizer steps")->capture_default_str();
    tv->add_option("--batch", tv_batch, "batch size")->capture_default_str();

    // compute-stats
    auto* cs = app.add_subcommand("compute-stats", "corpus statistics for the flow model");
    std::string cs_vcfg, cs_ckpt, cs_data, cs_out = "stats.bin";
    cs->add_option("--vae-config", cs_vcfg, "vae config json");
    cs->add_option("--vae-ckpt", cs_ckpt, "trained vae checkpoint")->required();
    cs->add_option("--data", cs_data, "curated corpus directory")->required();
    cs->add_option("--out", cs_out, "output stats file")->capture_default_str();

    // train-flow
    auto* tf = app.add_subcommand("train-flow", "train the text-to-trajectory flow model");
    std::string tf_cfg, tf_vcfg, tf_ckpt, tf_stats, tf_data, tf_out = "flow_run", tf_embed;
    std::size_t tf_steps = 200, tf_batch = 2;
    tf->add_option("--config", tf_cfg, "flow config json");
    tf->add_option("--vae-config", tf_vcfg, "vae config json");
    tf->add_option("--vae-ckpt", tf_ckpt, "trained vae checkpoint")->required();
    tf->add_option("--stats", tf_stats, "corpus stats file")->required();
    tf->add_option("--data", tf_data, "curated corpus directory")->required();
    tf->add_option("--embeddings", tf_embed, "text embedding archive (stub when omitted)");
    tf->add_option("--out", tf_out, "output directory")->capture_default_str();
    tf->add_option("--steps", tf_steps, "optimizer steps")->capture_default_str();
    tf->add_option("--batch", tf_batch, "batch size")->capture_default_str();

    // animate
    auto* an = app.add_subcommand("animate", "animate a static mesh from a text prompt");
    std::string an_mesh, an_prompt, an_vcfg, an_vckpt, an_fcfg, an_fckpt, an_stats, an_embed,
        an_out = "animation";
    an->add_option("--mesh", an_mesh, "input .dmb mesh (frame 0 is used)")->required();
    an->add_option("--prompt", an_prompt, "text prompt")->required();
    an->add_option("--vae-config", an_vcfg, "vae config json");
    an->add_option("--vae-ckpt", an_vckpt, "trained vae checkpoint")->required();
    an->add_option("--flow-config", an_fcfg, "flow config json");
    an->add_option("--flow-ckpt", an_fckpt, "trained flow checkpoint")->required();
    an->add_option("--stats", an_stats, "corpus stats file")->required();
    an->add_option("--embeddings", an_embed, "text embedding archive (stub when omitted)");
    an->add_option("--out", an_out, "output directory")->capture_default_str();

    // embed-import
    auto* ei = app.add_subcommand("embed-import", "import precomputed text embeddings");
    std::string ei_json, ei_out = "embeddings.dyte";
    ei->add_option("--json", ei_json, "json of prompt -> 2D float array")->required();
    ei->add_option("--out", ei_out, "output archive")->capture_default_str();

    // eval-sweep
    auto* es = app.add_subcommand("eval-sweep", "token-ratio reconstruction sweep");
    std::string es_vcfg, es_ckpt, es_data, es_out = "sweep.csv";
    es->add_option("--vae-config", es_vcfg, "vae config json");
    es->add_option("--vae-ckpt", es_ckpt, "trained vae checkpoint")->required();
    es->add_option("--data", es_data, "evaluation corpus directory")->required();
    es->add_option("--out", es_out, "output csv")->capture_default_str();

    // eval-ablation
    auto* ea = app.add_subcommand("eval-ablation", "component ablation table");
    std::string ea_vcfg, ea_data, ea_out = "ablation.csv";
    std::size_t ea_steps = 150;
    ea->add_option("--config", ea_vcfg, "base vae config json");
    ea->add_option("--data", ea_data, "training corpus directory")->required();
    ea->add_option("--out", ea_out, "output csv")->capture_default_str();
    ea->add_option("--steps", ea_steps, "training steps per configuration")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (ds->parsed())
            return cmd_dataset_build(ds_src, ds_synth, ds_out, ds_window, seed, threads);
        if (tv->parsed())
            return cmd_train_vae(tv_cfg, tv_data, tv_out, tv_resume, tv_steps, tv_batch, seed,
                                 threads);
        if (cs->parsed()) return cmd_compute_stats(cs_vcfg, cs_ckpt, cs_data, cs_out, seed, threads);
        if (tf->parsed())
            return cmd_train_flow(tf_cfg, tf_vcfg, tf_ckpt, tf_stats, tf_data, tf_out, tf_embed,
                                  tf_steps, tf_batch, seed, threads);
        if (an->parsed())
            return cmd_animate(an_mesh, an_prompt, an_vcfg, an_vckpt, an_fcfg, an_fckpt, an_stats,
                               an_embed, an_out, seed, threads);
        if (ei->parsed()) return cmd_embed_import(ei_json, ei_out);
        if (es->parsed()) return cmd_eval_sweep(es_vcfg, es_ckpt, es_data, es_out, seed, threads);
        if (ea->parsed())
            return cmd_eval_ablation(ea_vcfg, ea_data, ea_out, ea_steps, seed, threads);
    } catch (const CliError& e) {
        std::cerr << "error: " << e.message << "\n";
        return e.code;
    } catch (const CheckpointError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitMissing;
    } catch (const DmbError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitOk;
}
