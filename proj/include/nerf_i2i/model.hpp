#pragma once

#include <json.hpp>

#include "nerf_i2i/field.hpp"
#include "nerf_i2i/networks.hpp"
#include "nerf_i2i/renderer.hpp"

namespace nerf_i2i {

/// Architecture hyperparameters shared by the unconditional, conditional and I2I models.
struct ArchConfig {
    std::int64_t z_dim = 64;
    std::int64_t style_dim = 128;
    std::int64_t embed_dim = 64;
    std::int64_t mapping_layers = 4;
    std::int64_t mapping_hidden = 128;
    std::int64_t field_hidden = 64;
    std::int64_t field_layers = 2;
    std::int64_t pos_freqs = 4;
    std::int64_t dir_freqs = 2;
    std::int64_t feature_resolution = 16;
    /// generator_channels[0] = C_f (feature channels); one further entry per upsampling block.
    std::vector<std::int64_t> generator_channels{64, 32, 16};
    /// discriminator_channels[0] = from-RGB width; one further entry per halving block.
    std::vector<std::int64_t> discriminator_channels{32, 64, 64};
    std::int64_t num_classes = 2;

    std::int64_t feature_channels() const { return generator_channels.front(); }
    std::int64_t n_generator_blocks() const { return static_cast<std::int64_t>(generator_channels.size()) - 1; }
    std::int64_t image_resolution() const { return feature_resolution << n_generator_blocks(); }
    FieldConfig field_config() const;

    void validate() const;
    nlohmann::json to_json() const;
    static ArchConfig from_json(const nlohmann::json& j);
    bool operator==(const ArchConfig&) const = default;
};

struct LatentCodes {
    torch::Tensor z;
    torch::Tensor w1;
    torch::Tensor w2;
};

struct Generated {
    LatentCodes codes;
    torch::Tensor feature_map;  ///< f, [N, C_f, H_f, W_f]
    SynthesisOutput synthesis;
};

/// StyleNeRF-style 3D-aware GAN. Unconditional: mapping network "mapping", one
/// discriminator output. Conditional: "mapping1" (geometry, feeds F and the lower
/// generator blocks), "mapping2" over concat(z, e_l) (class path), class embedding
/// table and an L-output discriminator.
class StyleNeRFImpl : public torch::nn::Module {
public:
    StyleNeRFImpl(ArchConfig cfg, bool conditional);

    bool conditional() const { return conditional_; }
    const ArchConfig& arch() const { return cfg_; }
    std::int64_t num_outputs() const { return conditional_ ? cfg_.num_classes : 1; }

    torch::Tensor sample_z(std::int64_t n, torch::Generator& gen) const;

    torch::Tensor map_w1(const torch::Tensor& z);
    /// Conditional only; labels in {1..L}.
    torch::Tensor map_w2(const torch::Tensor& z, const torch::Tensor& labels);
    torch::Tensor map_w2_embedded(const torch::Tensor& z, const torch::Tensor& embeddings);
    /// Unconditional models return w2 = w1 and ignore labels.
    LatentCodes map_latents(const torch::Tensor& z, const torch::Tensor& labels);

    Generated generate(const torch::Tensor& z, const torch::Tensor& labels, const std::vector<CameraPose>& poses,
                       const RenderConfig& render_cfg, torch::Generator* gen = nullptr);

    /// Parameters updated by the generator step (everything but the discriminator).
    std::vector<torch::Tensor> generator_parameters();

    MappingNetwork mapping1{nullptr};
    MappingNetwork mapping2{nullptr};
    ClassEmbedding embedding{nullptr};
    FeatureField field{nullptr};
    Generator generator{nullptr};
    Discriminator disc{nullptr};

private:
    ArchConfig cfg_;
    bool conditional_;
};
TORCH_MODULE(StyleNeRF);

}  // namespace nerf_i2i
