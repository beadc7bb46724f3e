#include "nerf_i2i/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "nerf_i2i/transplant.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace nerf_i2i {

namespace {

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

fs::path input_or(const std::string& configured, const fs::path& fallback) {
    return configured.empty() ? fallback : fs::path(configured);
}

std::string video_dir_name(std::int64_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "video_%03lld", static_cast<long long>(i));
    return buf;
}

std::vector<fs::path> video_dirs(const fs::path& root) {
    if (!fs::is_directory(root)) throw IoError("no video directory at " + root.string());
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory() && e.path().filename().string().rfind("video_", 0) == 0) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw DataError("no video_NNN directories under " + root.string());
    return dirs;
}

ImageDataset training_data(const RunConfig& c, const fs::path& out_root) {
    if (c.data.source == "folder") {
        FolderLoadStats stats;
        auto ds = load_image_folder(c.data.path, c.arch.image_resolution(), &stats);
        if (stats.skipped > 0) std::cerr << "warning: skipped " << stats.skipped << " undecodable files\n";
        return ds;
    }
    return load_synthetic_dataset(input_or(c.inputs.dataset, out_root / "synth-data" / "dataset"));
}

template <class Log>
void append_log(std::ofstream& out, const std::string& stage, const Log& log, const json& j) {
    out << j.dump() << "\n";
    std::cout << stage << " step " << log.step;
    for (const auto& [k, v] : j.items())
        if (k != "step") std::cout << " " << k << "=" << v.dump();
    std::cout << "\n";
}

GanTrainConfig gan_config(const RunConfig& c, const std::string& stage, const fs::path& dir) {
    auto g = c.gan;
    g.seed = sub_seed(c.seed, stage);
    g.checkpoint_dir = dir / "checkpoints";
    return g;
}

GanTrainResult run_gan(const Checkpoint* init, const ImageDataset& data, const GanTrainConfig& g,
                       const ArchConfig& arch, const std::string& stage, const fs::path& dir) {
    std::ofstream log(dir / "log.jsonl", std::ios::trunc);
    auto on_step = [&](const GanStepLog& l) {
        append_log(log, stage, l,
                   {{"step", l.step}, {"d_loss", l.d_loss}, {"g_loss", l.g_loss}, {"r1", l.r1}, {"path", l.path},
                    {"real_score", l.real_score}, {"fake_score", l.fake_score}});
    };
    return init ? train_conditional(*init, data, g, on_step) : pretrain_unconditional(data, arch, g, on_step);
}

std::vector<VideoSequence> render_source_orbits(const RunConfig& c) {
    const auto& t = c.translate;
    std::mt19937_64 rng(sub_seed(c.seed, "orbit-scenes"));
    std::vector<VideoSequence> videos;
    for (std::int64_t v = 0; v < t.n_videos; ++v) {
        auto scene = sample_scene(c.data.classes.at(static_cast<std::size_t>(t.source_class - 1)), rng);
        auto video = render_orbit_video(scene, t.n_frames, t.yaw_start, t.yaw_end, t.pitch, c.prior,
                                        c.arch.image_resolution());
        for (auto& f : video.frames) f = quantize_image(f);
        videos.push_back(std::move(video));
    }
    return videos;
}

json codes_json(const LatentCodes& codes) {
    auto vec = [](const torch::Tensor& t) {
        auto flat = t.detach().to(torch::kFloat64).flatten().contiguous();
        return std::vector<double>(flat.data_ptr<double>(), flat.data_ptr<double>() + flat.numel());
    };
    return {{"z", vec(codes.z)}, {"w1", vec(codes.w1)}, {"w2", vec(codes.w2)}};
}

void stage_synth_data(const RunConfig& c, const fs::path&, const fs::path& dir) {
    if (c.data.source != "synthetic") throw ConfigError("synth-data needs data.source = 'synthetic'");
    auto ds = render_synthetic_dataset(c.data.classes, c.data.n_per_class, c.arch.image_resolution(), c.prior,
                                       sub_seed(c.seed, "data"), dir / "dataset");
    std::cout << "synth-data wrote " << ds.images.size() << " images to " << (dir / "dataset").string() << "\n";
}

void stage_pretrain(const RunConfig& c, const fs::path& out_root, const fs::path& dir) {
    auto data = training_data(c, out_root);
    auto res = run_gan(nullptr, data, gan_config(c, "pretrain", dir), c.arch, "pretrain", dir);
    res.checkpoint.save(dir / "checkpoint");
}

void stage_finetune(const RunConfig& c, const fs::path& out_root, const fs::path& dir) {
    auto data = training_data(c, out_root);
    Checkpoint init;
    if (c.finetune_init == "transplant") {
        auto uncond = Checkpoint::load(input_or(c.inputs.checkpoint, out_root / "pretrain" / "checkpoint"));
        auto src_arch = ArchConfig::from_json(uncond.manifest.at("architecture"));
        src_arch.num_classes = c.arch.num_classes;
        if (!(src_arch == c.arch))
            throw ConfigError("architecture block differs from the pretrained checkpoint's architecture");
        init = transplant_conditional(uncond, c.arch.num_classes, sub_seed(c.seed, "transplant"));
    } else {
        init = init_conditional(c.arch, c.arch.num_classes, sub_seed(c.seed, "scratch"));
    }
    auto res = run_gan(&init, data, gan_config(c, "finetune", dir), c.arch, "finetune", dir);
    res.checkpoint.save(dir / "checkpoint");
}

void stage_train_adaptor(const RunConfig& c, const fs::path& out_root, const fs::path& dir) {
    auto cond = Checkpoint::load(input_or(c.inputs.checkpoint, out_root / "finetune" / "checkpoint"));
    auto bundle = load_bundle(assemble_i2i(cond, c.adaptor, sub_seed(c.seed, "assemble")));
    const auto before = tensor_checksum(bundle->frozen_tensors());
    const auto datasets_before = ImageDataset::constructions();

    std::ofstream log(dir / "log.jsonl", std::ios::trunc);
    auto res = train_adaptor(bundle, c.adaptor_train, [&](const AdaptorStepLog& l) {
        append_log(log, "train-adaptor", l,
                   {{"step", l.step}, {"total", l.total}, {"alignment", l.alignment},
                    {"hierarchical", l.hierarchical}, {"relative", l.relative}});
    });
    const auto after = tensor_checksum(bundle->frozen_tensors());
    res.checkpoint.save(dir / "checkpoint");
    write_json(dir / "audit.json", {{"frozen_checksum_before", before},
                                    {"frozen_checksum_after", after},
                                    {"frozen_unchanged", before == after},
                                    {"datasets_constructed", ImageDataset::constructions() - datasets_before}});
    if (before != after) throw FrozenAuditError("frozen parameters changed during adaptor training");
}

void stage_orbit(const RunConfig& c, const fs::path&, const fs::path& dir) {
    auto videos = render_source_orbits(c);
    for (std::size_t v = 0; v < videos.size(); ++v)
        save_video(videos[v], dir / video_dir_name(static_cast<std::int64_t>(v)));
    std::cout << "orbit wrote " << videos.size() << " videos\n";
}

void stage_translate(const RunConfig& c, const fs::path& out_root, const fs::path& dir) {
    auto bundle = load_bundle(Checkpoint::load(input_or(c.inputs.checkpoint, out_root / "train-adaptor" / "checkpoint")));
    std::vector<VideoSequence> sources;
    if (!c.inputs.videos.empty()) {
        for (const auto& d : video_dirs(c.inputs.videos)) sources.push_back(load_video(d));
    } else {
        sources = render_source_orbits(c);
    }
    for (std::size_t v = 0; v < sources.size(); ++v) {
        const auto vdir = dir / video_dir_name(static_cast<std::int64_t>(v));
        save_video(sources[v], vdir / "source");
        auto out = translate_video(bundle, sources[v], c.translate.target_class, std::nullopt,
                                   sub_seed(c.seed, "translate") + v);
        save_video(out.video, vdir / "translated");
        write_json(vdir / "codes.json", codes_json(out.codes));
    }
    std::cout << "translate wrote " << sources.size() << " videos\n";
}

void stage_eval(const RunConfig& c, const fs::path& out_root, const fs::path& dir) {
    const auto root = input_or(c.inputs.translations, out_root / "translate");
    std::vector<torch::Tensor> videos;
    std::vector<torch::Tensor> frames;
    for (const auto& d : video_dirs(root)) {
        auto v = to_unit_range(load_video(d / "translated").stacked());
        videos.push_back(v);
        frames.push_back(v);
    }
    auto data = training_data(c, out_root);
    const auto& idx = data.indices_of_class(c.translate.target_class);
    auto real = idx.empty() ? torch::Tensor() : to_unit_range(data.batch(idx));
    RandomConvExtractor extractor(sub_seed(c.seed, "extractor"));
    auto report = eval_report(videos, real, torch::cat(frames, 0), extractor, c.metrics);
    write_json(dir / "report.json", report);
    std::cout << "eval " << report.dump() << "\n";
}

}  // namespace

void run_stage(const std::string& stage, const RunConfig& cfg, const fs::path& out_root) {
    using Fn = void (*)(const RunConfig&, const fs::path&, const fs::path&);
    static const std::map<std::string, Fn> stages{
        {"synth-data", stage_synth_data}, {"pretrain", stage_pretrain},   {"finetune", stage_finetune},
        {"train-adaptor", stage_train_adaptor}, {"translate", stage_translate}, {"eval", stage_eval},
        {"orbit", stage_orbit}};
    auto it = stages.find(stage);
    if (it == stages.end()) throw ConfigError("unknown subcommand '" + stage + "'");
    const auto dir = out_root / stage;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    write_json(dir / "config.json", cfg.resolved);
    it->second(cfg, out_root, dir);
}

int run_cli(int argc, char** argv) {
    CLI::App app{"3D-aware multi-class image-to-image translation"};
    app.require_subcommand(1, 1);
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir = "runs";
    std::string device = "cpu";
    for (const auto& name : kSubcommands) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON run config");
        sub->add_option("--override", overrides, "KEY=VALUE (dotted path or unique bare key), repeatable");
        sub->add_option("--out", out_dir, "run directory");
        sub->add_option("--device", device, "cpu | accelerator")->check(CLI::IsMember({"cpu", "accelerator"}));
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    const auto stage = app.get_subcommands().front()->get_name();

    RunConfig cfg;
    try {
        json user;
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw ConfigError("cannot read config file " + config_path);
            try {
                user = json::parse(in);
            } catch (const json::parse_error& e) {
                throw ConfigError("config file " + config_path + " is not valid JSON: " + e.what());
            }
        }
        cfg = resolve_config(user, overrides);
        if (device == "accelerator" && !torch::cuda::is_available())
            throw ConfigError("--device accelerator requested but no accelerator is available");
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }

    try {
        run_stage(stage, cfg, out_dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error in stage " << stage << ": " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "stage " << stage << " failed: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace nerf_i2i
