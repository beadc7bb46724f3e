#pragma once

#include "nerf_i2i/common.hpp"

namespace nerf_i2i {

struct FieldConfig {
    std::int64_t style_dim = 128;
    std::int64_t hidden = 64;
    std::int64_t layers = 2;
    std::int64_t pos_freqs = 4;
    std::int64_t dir_freqs = 2;
    std::int64_t feature_channels = 64;
};

/// Field output for a batch of points: features [..., C_f], density [...] (non-negative).
struct FieldSample {
    torch::Tensor features;
    torch::Tensor sigma;
};

/// [x, sin(2^k x), cos(2^k x)] for k < n_freqs, applied to the last axis.
torch::Tensor positional_encoding(const torch::Tensor& x, std::int64_t n_freqs);

/// Style-modulated coordinate network F(x, d, w) -> (c, sigma).
///
/// Hidden layers are FiLM-modulated by an affine map of the style code. The view
/// direction only enters the feature head, so density is view-independent.
/// `rgb_head` is the 1x1 projection used by the NeRF-path regularizer.
class FeatureFieldImpl : public torch::nn::Module {
public:
    explicit FeatureFieldImpl(FieldConfig cfg = {});

    /// x, d: [N, P, 3]; w: [N, style_dim].
    FieldSample forward(const torch::Tensor& x, const torch::Tensor& d, const torch::Tensor& w);

    /// Single point evaluation; returns features [C_f] and sigma [] (scalar).
    FieldSample eval_point(const torch::Tensor& x, const torch::Tensor& d, const torch::Tensor& w);

    /// Projects a feature map [N, C_f, H, W] to RGB [N, 3, H, W].
    torch::Tensor project_rgb(const torch::Tensor& feature_map);

    const FieldConfig& config() const { return cfg_; }

    torch::nn::ModuleList layers{nullptr};
    torch::nn::ModuleList film{nullptr};
    torch::nn::Linear sigma_head{nullptr};
    torch::nn::Linear feature_hidden{nullptr};
    torch::nn::Linear feature_head{nullptr};
    torch::nn::Linear rgb_head{nullptr};

private:
    FieldConfig cfg_;
};
TORCH_MODULE(FeatureField);

}  // namespace nerf_i2i
