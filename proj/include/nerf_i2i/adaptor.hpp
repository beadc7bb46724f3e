#pragma once

#include <memory>
#include <string>

#include <json.hpp>

#include "nerf_i2i/common.hpp"

namespace nerf_i2i {

struct AdaptorConfig {
    std::string kind = "unet";        ///< "unet" | "plain"
    std::int64_t in_channels = 64;    ///< encoder feature channels
    std::int64_t out_channels = 64;   ///< C_f
    std::int64_t resolution = 16;     ///< encoder feature / NeRF feature-map side length
    std::int64_t plain_width = 64;    ///< hidden width of the plain adaptor

    void validate() const;
    nlohmann::json to_json() const;
    static AdaptorConfig from_json(const nlohmann::json& j);
};

/// A: encoder features [N, C_e, R, R] -> f_hat [N, C_f, R, R].
class AdaptorImpl : public torch::nn::Module {
public:
    virtual torch::Tensor forward(const torch::Tensor& features) = 0;
    /// Architecture summary recorded in checkpoint manifests.
    virtual nlohmann::json describe() const = 0;
};

/// Full U-net rung widths; rungs beyond what the input resolution supports are dropped.
inline constexpr std::int64_t kUNetLadder[] = {64, 128, 256, 512, 512};

/// Number of stride-2 rungs usable at `resolution` (stops at a 2x2 bottleneck, at most 5).
std::int64_t unet_depth(std::int64_t resolution);

/// U-net: stride-2 conv + batch-norm + leaky-ReLU(0.2) encoder rungs, transposed-conv +
/// batch-norm + ReLU decoder rungs, encoder rung k concatenated onto decoder rung n-k,
/// last decoder layer a plain transposed conv to out_channels.
class UNetAdaptorImpl : public AdaptorImpl {
public:
    explicit UNetAdaptorImpl(const AdaptorConfig& cfg);
    torch::Tensor forward(const torch::Tensor& features) override;
    nlohmann::json describe() const override;

    std::vector<std::int64_t> encoder_channels() const { return enc_channels_; }
    std::vector<std::int64_t> decoder_channels() const { return dec_channels_; }

    torch::nn::ModuleList down{nullptr};
    torch::nn::ModuleList up{nullptr};

private:
    AdaptorConfig cfg_;
    std::vector<std::int64_t> enc_channels_;
    std::vector<std::int64_t> dec_channels_;
};

/// Single-resolution conv stack without skips or downsampling (ablation baseline).
class PlainAdaptorImpl : public AdaptorImpl {
public:
    explicit PlainAdaptorImpl(const AdaptorConfig& cfg);
    torch::Tensor forward(const torch::Tensor& features) override;
    nlohmann::json describe() const override;

    torch::nn::Sequential body{nullptr};
    torch::nn::Conv2d head{nullptr};

private:
    AdaptorConfig cfg_;
};

std::shared_ptr<AdaptorImpl> make_adaptor(const AdaptorConfig& cfg);

}  // namespace nerf_i2i
