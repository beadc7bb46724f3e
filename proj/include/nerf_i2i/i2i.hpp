#pragma once

#include <functional>
#include <optional>

#include "nerf_i2i/adaptor.hpp"
#include "nerf_i2i/checkpoint.hpp"
#include "nerf_i2i/data.hpp"
#include "nerf_i2i/losses.hpp"
#include "nerf_i2i/model.hpp"

namespace nerf_i2i {

/// Translation system: encoder E (discriminator trunk), adaptor A, generator G,
/// mapping networks M1/M2, class embeddings and the NeRF field F.
class I2IBundleImpl : public torch::nn::Module {
public:
    I2IBundleImpl(ArchConfig arch, AdaptorConfig adaptor_cfg);

    const ArchConfig& arch() const { return arch_; }
    const AdaptorConfig& adaptor_config() const { return adaptor_cfg_; }

    /// requires_grad = false on everything outside the adaptor.
    void freeze_non_adaptor();
    std::vector<std::string> trainable_names() const;
    /// Every parameter and buffer outside the adaptor, in registration order.
    std::vector<torch::Tensor> frozen_tensors() const;

    LatentCodes codes(const torch::Tensor& z, const torch::Tensor& labels);
    LatentCodes codes_embedded(const torch::Tensor& z, const torch::Tensor& embeddings);

    DiscriminatorTrunk encoder{nullptr};
    std::shared_ptr<AdaptorImpl> adaptor;
    Generator generator{nullptr};
    MappingNetwork mapping1{nullptr};
    MappingNetwork mapping2{nullptr};
    ClassEmbedding embedding{nullptr};
    FeatureField field{nullptr};

private:
    ArchConfig arch_;
    AdaptorConfig adaptor_cfg_;
};
TORCH_MODULE(I2IBundle);

/// Rebuilds a bundle from an "i2i" checkpoint, applying its frozen flags.
I2IBundle load_bundle(const Checkpoint& ckpt);
/// Snapshot with kind "i2i", architecture, adaptor description and trainable set.
Checkpoint bundle_checkpoint(const I2IBundle& bundle, nlohmann::json extra = nlohmann::json::object());

struct AdaptorTrainConfig {
    std::int64_t steps = 2000;
    std::int64_t batch = 8;
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    LossWeights weights;
    std::int64_t relative_anchors = 16;
    HierarchyRange hierarchy_range;
    RenderConfig render;  ///< height/width are taken from the architecture
    CameraPrior prior;
    std::uint64_t seed = 0;

    void validate() const;
};

struct AdaptorStepLog {
    std::int64_t step;
    double total;
    double alignment;
    double hierarchical;
    double relative;
};

struct AdaptorTrainResult {
    Checkpoint checkpoint;
    std::vector<AdaptorStepLog> log;
};

/// Data-free adaptor training: each step samples (z, l, pose), renders f = F(x, d, M1(z)),
/// synthesizes I_hat = G(f, w1, w2), predicts f_hat = A(E(I_hat)), re-synthesizes from
/// f_hat with the same codes and descends the weighted alignment / hierarchical /
/// relative objective. Only the adaptor is updated; throws FrozenAuditError if any
/// other parameter is trainable. Zero-weighted terms are reported but not computed
/// into the graph.
AdaptorTrainResult train_adaptor(I2IBundle& bundle, const AdaptorTrainConfig& cfg,
                                 const std::function<void(const AdaptorStepLog&)>& on_step = {});

struct TranslationRequest {
    torch::Tensor image;  ///< [3, H, W] or [N, 3, H, W] in [-1, 1]
    std::int64_t target_class = 1;
    std::optional<torch::Tensor> z;  ///< [Z] or [N, Z]; sampled from `seed` when absent
    std::uint64_t seed = 0;
};

/// G(A(E(I)), M1(z), M2(z, l)) in inference mode. Returns [N, 3, H, W].
torch::Tensor translate_image(I2IBundle& bundle, const TranslationRequest& request);

/// G(f_hat, w1, w2) from externally supplied features (bypass of E and A).
torch::Tensor synthesize_from_features(I2IBundle& bundle, const torch::Tensor& f_hat, const LatentCodes& codes);

struct TranslatedVideo {
    VideoSequence video;
    LatentCodes codes;  ///< the single (z, w1, w2) shared by every frame
};

/// Translates every frame with one style sampled once for the whole video.
TranslatedVideo translate_video(I2IBundle& bundle, const VideoSequence& source, std::int64_t target_class,
                                std::optional<torch::Tensor> z = std::nullopt, std::uint64_t seed = 0);

/// Baseline: an independent style per frame (what a 2D per-image translator does).
VideoSequence translate_video_independent_styles(I2IBundle& bundle, const VideoSequence& source,
                                                 std::int64_t target_class, std::uint64_t seed);

/// w2 = M2(z, (1 - alpha) e_a + alpha e_b); otherwise identical to translate_image.
torch::Tensor interpolate_classes(I2IBundle& bundle, const torch::Tensor& image, std::int64_t label_a,
                                  std::int64_t label_b, double alpha, const torch::Tensor& z);

}  // namespace nerf_i2i
