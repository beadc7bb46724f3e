#include "nerf_i2i/model.hpp"

namespace nerf_i2i {

FieldConfig ArchConfig::field_config() const {
    FieldConfig f;
    f.style_dim = style_dim;
    f.hidden = field_hidden;
    f.layers = field_layers;
    f.pos_freqs = pos_freqs;
    f.dir_freqs = dir_freqs;
    f.feature_channels = feature_channels();
    return f;
}

void ArchConfig::validate() const {
    auto positive = [](std::int64_t v, const char* name) {
        if (v < 1) throw ConfigError(std::string("architecture.") + name + " must be >= 1");
    };
    positive(z_dim, "z_dim");
    positive(style_dim, "style_dim");
    positive(embed_dim, "embed_dim");
    positive(mapping_layers, "mapping_layers");
    positive(mapping_hidden, "mapping_hidden");
    positive(field_hidden, "field_hidden");
    positive(field_layers, "field_layers");
    positive(feature_resolution, "feature_resolution");
    positive(num_classes, "num_classes");
    if (pos_freqs < 0 || dir_freqs < 0) throw ConfigError("architecture: frequency counts must be >= 0");
    if (generator_channels.size() < 2)
        throw ConfigError("architecture.generator_channels needs C_f plus at least one block");
    if (discriminator_channels.size() < 2)
        throw ConfigError("architecture.discriminator_channels needs at least one block");
    for (auto c : generator_channels) positive(c, "generator_channels[]");
    for (auto c : discriminator_channels) positive(c, "discriminator_channels[]");
    const auto d_blocks = static_cast<std::int64_t>(discriminator_channels.size()) - 1;
    if (image_resolution() >> d_blocks < 1 || image_resolution() % (1LL << d_blocks) != 0)
        throw ConfigError("architecture: image resolution not divisible by 2^discriminator blocks");
}

nlohmann::json ArchConfig::to_json() const {
    return {{"z_dim", z_dim},
            {"style_dim", style_dim},
            {"embed_dim", embed_dim},
            {"mapping_layers", mapping_layers},
            {"mapping_hidden", mapping_hidden},
            {"field_hidden", field_hidden},
            {"field_layers", field_layers},
            {"pos_freqs", pos_freqs},
            {"dir_freqs", dir_freqs},
            {"feature_resolution", feature_resolution},
            {"generator_channels", generator_channels},
            {"discriminator_channels", discriminator_channels},
            {"num_classes", num_classes}};
}

ArchConfig ArchConfig::from_json(const nlohmann::json& j) {
    ArchConfig a;
    try {
        a.z_dim = j.at("z_dim").get<std::int64_t>();
        a.style_dim = j.at("style_dim").get<std::int64_t>();
        a.embed_dim = j.at("embed_dim").get<std::int64_t>();
        a.mapping_layers = j.at("mapping_layers").get<std::int64_t>();
        a.mapping_hidden = j.at("mapping_hidden").get<std::int64_t>();
        a.field_hidden = j.at("field_hidden").get<std::int64_t>();
        a.field_layers = j.at("field_layers").get<std::int64_t>();
        a.pos_freqs = j.at("pos_freqs").get<std::int64_t>();
        a.dir_freqs = j.at("dir_freqs").get<std::int64_t>();
        a.feature_resolution = j.at("feature_resolution").get<std::int64_t>();
        a.generator_channels = j.at("generator_channels").get<std::vector<std::int64_t>>();
        a.discriminator_channels = j.at("discriminator_channels").get<std::vector<std::int64_t>>();
        a.num_classes = j.at("num_classes").get<std::int64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("architecture: ") + e.what());
    }
    a.validate();
    return a;
}

StyleNeRFImpl::StyleNeRFImpl(ArchConfig cfg, bool conditional) : cfg_(std::move(cfg)), conditional_(conditional) {
    cfg_.validate();
    mapping1 = register_module(conditional_ ? "mapping1" : "mapping",
                               MappingNetwork(cfg_.z_dim, cfg_.mapping_hidden, cfg_.style_dim, cfg_.mapping_layers));
    if (conditional_) {
        mapping2 = register_module("mapping2", MappingNetwork(cfg_.z_dim + cfg_.embed_dim, cfg_.mapping_hidden,
                                                              cfg_.style_dim, cfg_.mapping_layers));
        embedding = register_module("embedding", ClassEmbedding(cfg_.num_classes, cfg_.embed_dim));
    }
    field = register_module("field", FeatureField(cfg_.field_config()));
    generator = register_module("generator", Generator(cfg_.generator_channels, cfg_.style_dim));
    disc = register_module("disc",
                           Discriminator(cfg_.discriminator_channels, cfg_.image_resolution(), num_outputs()));
}

torch::Tensor StyleNeRFImpl::sample_z(std::int64_t n, torch::Generator& gen) const {
    return torch::randn({n, cfg_.z_dim}, gen, torch::TensorOptions().dtype(torch::kFloat32));
}

torch::Tensor StyleNeRFImpl::map_w1(const torch::Tensor& z) { return mapping1->forward(z); }

torch::Tensor StyleNeRFImpl::map_w2(const torch::Tensor& z, const torch::Tensor& labels) {
    if (!conditional_) throw ConfigError("map_w2 requires a conditional model");
    return map_w2_embedded(z, embedding->forward(labels));
}

torch::Tensor StyleNeRFImpl::map_w2_embedded(const torch::Tensor& z, const torch::Tensor& embeddings) {
    if (!conditional_) throw ConfigError("map_w2 requires a conditional model");
    expect_shape(embeddings, {z.size(0), cfg_.embed_dim}, "class embeddings");
    return mapping2->forward(torch::cat({z, embeddings}, 1));
}

LatentCodes StyleNeRFImpl::map_latents(const torch::Tensor& z, const torch::Tensor& labels) {
    LatentCodes codes;
    codes.z = z;
    codes.w1 = map_w1(z);
    codes.w2 = conditional_ ? map_w2(z, labels) : codes.w1;
    return codes;
}

Generated StyleNeRFImpl::generate(const torch::Tensor& z, const torch::Tensor& labels,
                                  const std::vector<CameraPose>& poses, const RenderConfig& render_cfg,
                                  torch::Generator* gen) {
    Generated out;
    out.codes = map_latents(z, labels);
    out.feature_map = render_feature_map(field, poses, out.codes.w1, render_cfg, gen);
    out.synthesis = generator->forward(out.feature_map, out.codes.w1, out.codes.w2);
    return out;
}

std::vector<torch::Tensor> StyleNeRFImpl::generator_parameters() {
    std::vector<torch::Tensor> params;
    for (auto& p : named_parameters()) {
        if (p.key().rfind("disc.", 0) != 0) params.push_back(p.value());
    }
    return params;
}

}  // namespace nerf_i2i
