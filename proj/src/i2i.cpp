#include "nerf_i2i/i2i.hpp"

#include <cmath>
#include <random>
#include <set>

namespace nerf_i2i {

namespace {

bool is_adaptor(const std::string& name) { return name.rfind("adaptor.", 0) == 0; }

AdaptorConfig derived_adaptor_config(const ArchConfig& arch, AdaptorConfig cfg) {
    DiscriminatorTrunk probe(arch.discriminator_channels, arch.image_resolution());
    if (probe->out_resolution() != arch.feature_resolution)
        throw ConfigError("encoder output resolution " + std::to_string(probe->out_resolution()) +
                          " differs from the feature-map resolution " + std::to_string(arch.feature_resolution));
    cfg.in_channels = probe->out_channels();
    cfg.out_channels = arch.feature_channels();
    cfg.resolution = arch.feature_resolution;
    cfg.validate();
    return cfg;
}

torch::Tensor as_batch(const torch::Tensor& image, std::int64_t res) {
    auto x = image.dim() == 3 ? image.unsqueeze(0) : image;
    expect_shape(x, {-1, 3, res, res}, "translation input image");
    return x.to(torch::kFloat32);
}

torch::Tensor style_batch(const std::optional<torch::Tensor>& z, std::int64_t n, std::int64_t z_dim,
                          std::uint64_t seed) {
    if (!z) {
        auto gen = make_generator(sub_seed(seed, "style"));
        return torch::randn({n, z_dim}, gen);
    }
    auto zz = z->dim() == 1 ? z->unsqueeze(0) : *z;
    expect_shape(zz, {-1, z_dim}, "style code z");
    if (zz.size(0) == 1 && n > 1) return zz.expand({n, z_dim}).contiguous();
    if (zz.size(0) != n) throw ShapeError("style code batch " + shape_str(zz) + " does not match " + std::to_string(n) + " images");
    return zz.to(torch::kFloat32);
}

void check_finite(const torch::Tensor& t, const std::string& what, std::int64_t step) {
    if (!std::isfinite(t.item<double>()))
        throw NumericError(what + " is not finite at step " + std::to_string(step));
}

}  // namespace

I2IBundleImpl::I2IBundleImpl(ArchConfig arch, AdaptorConfig adaptor_cfg)
    : arch_(std::move(arch)), adaptor_cfg_(derived_adaptor_config(arch_, std::move(adaptor_cfg))) {
    encoder = register_module("encoder", DiscriminatorTrunk(arch_.discriminator_channels, arch_.image_resolution()));
    adaptor = register_module("adaptor", make_adaptor(adaptor_cfg_));
    generator = register_module("generator", Generator(arch_.generator_channels, arch_.style_dim));
    mapping1 = register_module("mapping1", MappingNetwork(arch_.z_dim, arch_.mapping_hidden, arch_.style_dim,
                                                          arch_.mapping_layers));
    mapping2 = register_module("mapping2", MappingNetwork(arch_.z_dim + arch_.embed_dim, arch_.mapping_hidden,
                                                          arch_.style_dim, arch_.mapping_layers));
    embedding = register_module("embedding", ClassEmbedding(arch_.num_classes, arch_.embed_dim));
    field = register_module("field", FeatureField(arch_.field_config()));
}

void I2IBundleImpl::freeze_non_adaptor() {
    for (auto& p : named_parameters()) p.value().set_requires_grad(is_adaptor(p.key()));
}

std::vector<std::string> I2IBundleImpl::trainable_names() const {
    std::vector<std::string> names;
    for (const auto& p : named_parameters())
        if (p.value().requires_grad()) names.push_back(p.key());
    return names;
}

std::vector<torch::Tensor> I2IBundleImpl::frozen_tensors() const {
    std::vector<torch::Tensor> out;
    for (const auto& p : named_parameters())
        if (!is_adaptor(p.key())) out.push_back(p.value());
    for (const auto& b : named_buffers())
        if (!is_adaptor(b.key())) out.push_back(b.value());
    return out;
}

LatentCodes I2IBundleImpl::codes(const torch::Tensor& z, const torch::Tensor& labels) {
    return codes_embedded(z, embedding->forward(labels));
}

LatentCodes I2IBundleImpl::codes_embedded(const torch::Tensor& z, const torch::Tensor& embeddings) {
    expect_shape(z, {-1, arch_.z_dim}, "style code z");
    auto e = embeddings.dim() == 1 ? embeddings.unsqueeze(0).expand({z.size(0), arch_.embed_dim}) : embeddings;
    expect_shape(e, {z.size(0), arch_.embed_dim}, "class embeddings");
    return {z, mapping1->forward(z), mapping2->forward(torch::cat({z, e}, 1))};
}

I2IBundle load_bundle(const Checkpoint& ckpt) {
    if (ckpt.kind() != "i2i") throw TransplantError("expected an i2i checkpoint, got kind '" + ckpt.kind() + "'");
    ArchConfig arch;
    AdaptorConfig acfg;
    std::vector<std::string> trainable;
    try {
        arch = ArchConfig::from_json(ckpt.manifest.at("architecture"));
        acfg = AdaptorConfig::from_json(ckpt.manifest.at("adaptor").at("config"));
        trainable = ckpt.manifest.at("trainable").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw TransplantError(std::string("malformed i2i manifest: ") + e.what());
    }
    I2IBundle bundle(arch, acfg);
    ckpt.apply_to(*bundle);
    const std::set<std::string> train_set(trainable.begin(), trainable.end());
    for (auto& p : bundle->named_parameters()) p.value().set_requires_grad(train_set.count(p.key()) > 0);
    return bundle;
}

Checkpoint bundle_checkpoint(const I2IBundle& bundle, nlohmann::json extra) {
    nlohmann::json m = {{"kind", "i2i"},
                        {"architecture", bundle->arch().to_json()},
                        {"adaptor", {{"config", bundle->adaptor_config().to_json()}, {"layout", bundle->adaptor->describe()}}},
                        {"trainable", bundle->trainable_names()}};
    m.update(extra);
    return Checkpoint::from_module(*bundle, m);
}

void AdaptorTrainConfig::validate() const {
    if (steps < 0) throw ConfigError("adaptor training: steps must be >= 0");
    if (batch < 2) throw ConfigError("adaptor training: batch-norm needs a batch of at least 2");
    if (!(lr > 0.0)) throw ConfigError("adaptor training: learning rate must be > 0");
    if (relative_anchors < 1) throw ConfigError("adaptor training: relative_anchors must be >= 1");
    weights.validate();
    render.validate();
    prior.validate();
}

AdaptorTrainResult train_adaptor(I2IBundle& bundle, const AdaptorTrainConfig& cfg,
                                 const std::function<void(const AdaptorStepLog&)>& on_step) {
    cfg.validate();
    std::vector<std::string> leaked;
    for (const auto& p : bundle->named_parameters())
        if (!is_adaptor(p.key()) && p.value().requires_grad()) leaked.push_back(p.key());
    if (!leaked.empty()) {
        std::string msg = "parameters outside the adaptor are trainable:";
        for (const auto& n : leaked) msg += "\n  " + n;
        throw FrozenAuditError(msg);
    }

    const auto& arch = bundle->arch();
    auto render_cfg = cfg.render;
    render_cfg.height = render_cfg.width = arch.feature_resolution;

    std::vector<torch::Tensor> params;
    for (auto& p : bundle->adaptor->parameters()) params.push_back(p);
    torch::optim::Adam opt(params, torch::optim::AdamOptions(cfg.lr).betas({cfg.beta1, cfg.beta2}));

    auto gen = make_generator(sub_seed(cfg.seed, "adaptor-latents"));
    auto render_gen = make_generator(sub_seed(cfg.seed, "adaptor-render"));
    std::mt19937_64 camera_rng(sub_seed(cfg.seed, "adaptor-cameras"));
    const auto anchor_seed = sub_seed(cfg.seed, "adaptor-anchors");

    bundle->eval();
    bundle->adaptor->train();
    AdaptorTrainResult result;
    for (std::int64_t step = 0; step < cfg.steps; ++step) {
        auto z = torch::randn({cfg.batch, arch.z_dim}, gen);
        auto labels = torch::randint(1, arch.num_classes + 1, {cfg.batch}, gen, torch::kLong);
        std::vector<CameraPose> poses;
        for (std::int64_t i = 0; i < cfg.batch; ++i) poses.push_back(sample_camera(cfg.prior, camera_rng));

        torch::Tensor f, image;
        std::vector<torch::Tensor> hier_f;
        LatentCodes codes;
        {
            torch::NoGradGuard no_grad;
            codes = bundle->codes(z, labels);
            f = render_feature_map(bundle->field, poses, codes.w1, render_cfg,
                                   render_cfg.stratified ? &render_gen : nullptr);
            auto synth = bundle->generator->forward(f, codes.w1, codes.w2);
            hier_f = hierarchy(synth.blocks, synth.image);
            image = synth.image;
        }
        auto f_hat = bundle->adaptor->forward(bundle->encoder->forward(image));

        std::vector<torch::Tensor> hier_hat;
        if (cfg.weights.hierarchical > 0.0) {
            auto synth_hat = bundle->generator->forward(f_hat, codes.w1, codes.w2);
            hier_hat = hierarchy(synth_hat.blocks, synth_hat.image);
        } else {
            torch::NoGradGuard no_grad;
            auto synth_hat = bundle->generator->forward(f_hat.detach(), codes.w1, codes.w2);
            hier_hat = hierarchy(synth_hat.blocks, synth_hat.image);
        }
        auto loss = adaptor_objective(f, f_hat, hier_f, hier_hat, cfg.weights, cfg.relative_anchors,
                                      anchor_seed + static_cast<std::uint64_t>(step), cfg.hierarchy_range);
        check_finite(loss.total, "adaptor loss", step);

        opt.zero_grad();
        loss.total.backward();
        opt.step();

        AdaptorStepLog log{step, loss.total.item<double>(), loss.alignment.item<double>(),
                           loss.hierarchical.item<double>(), loss.relative.item<double>()};
        result.log.push_back(log);
        if (on_step) on_step(log);
    }
    bundle->eval();
    result.checkpoint = bundle_checkpoint(bundle, {{"step", cfg.steps}, {"seed", cfg.seed}});
    return result;
}

torch::Tensor synthesize_from_features(I2IBundle& bundle, const torch::Tensor& f_hat, const LatentCodes& codes) {
    torch::NoGradGuard no_grad;
    const auto& a = bundle->arch();
    expect_shape(f_hat, {-1, a.feature_channels(), a.feature_resolution, a.feature_resolution}, "f_hat");
    return bundle->generator->forward(f_hat, codes.w1, codes.w2).image;
}

torch::Tensor translate_image(I2IBundle& bundle, const TranslationRequest& request) {
    torch::NoGradGuard no_grad;
    bundle->eval();
    const auto& a = bundle->arch();
    auto x = as_batch(request.image, a.image_resolution());
    const auto n = x.size(0);
    auto z = style_batch(request.z, n, a.z_dim, request.seed);
    auto codes = bundle->codes(z, torch::full({n}, request.target_class, torch::kLong));
    auto f_hat = bundle->adaptor->forward(bundle->encoder->forward(x));
    return bundle->generator->forward(f_hat, codes.w1, codes.w2).image;
}

TranslatedVideo translate_video(I2IBundle& bundle, const VideoSequence& source, std::int64_t target_class,
                                std::optional<torch::Tensor> z, std::uint64_t seed) {
    if (source.frames.empty()) throw DataError("cannot translate an empty video");
    torch::NoGradGuard no_grad;
    bundle->eval();
    const auto& a = bundle->arch();
    TranslatedVideo out;
    auto z1 = style_batch(z, 1, a.z_dim, seed);
    out.codes = bundle->codes(z1, torch::full({1}, target_class, torch::kLong));
    out.video.poses = source.poses;
    constexpr std::int64_t kChunk = 16;
    auto frames = as_batch(source.stacked(), a.image_resolution());
    for (std::int64_t s = 0; s < frames.size(0); s += kChunk) {
        auto chunk = frames.slice(0, s, std::min(s + kChunk, frames.size(0)));
        const auto n = chunk.size(0);
        auto w1 = out.codes.w1.expand({n, a.style_dim});
        auto w2 = out.codes.w2.expand({n, a.style_dim});
        auto images = bundle->generator->forward(bundle->adaptor->forward(bundle->encoder->forward(chunk)), w1, w2).image;
        for (std::int64_t i = 0; i < n; ++i) out.video.frames.push_back(images[i].contiguous());
    }
    return out;
}

VideoSequence translate_video_independent_styles(I2IBundle& bundle, const VideoSequence& source,
                                                 std::int64_t target_class, std::uint64_t seed) {
    if (source.frames.empty()) throw DataError("cannot translate an empty video");
    TranslationRequest req;
    req.image = source.stacked();
    req.target_class = target_class;
    req.seed = seed;
    auto images = translate_image(bundle, req);
    VideoSequence out;
    out.poses = source.poses;
    for (std::int64_t i = 0; i < images.size(0); ++i) out.frames.push_back(images[i].contiguous());
    return out;
}

torch::Tensor interpolate_classes(I2IBundle& bundle, const torch::Tensor& image, std::int64_t label_a,
                                  std::int64_t label_b, double alpha, const torch::Tensor& z) {
    torch::NoGradGuard no_grad;
    bundle->eval();
    const auto& a = bundle->arch();
    auto x = as_batch(image, a.image_resolution());
    const auto n = x.size(0);
    auto zz = style_batch(z, n, a.z_dim, 0);
    auto e = bundle->embedding->mix(label_a, label_b, alpha);
    auto codes = bundle->codes_embedded(zz, e.unsqueeze(0).expand({n, a.embed_dim}));
    auto f_hat = bundle->adaptor->forward(bundle->encoder->forward(x));
    return bundle->generator->forward(f_hat, codes.w1, codes.w2).image;
}

}  // namespace nerf_i2i
