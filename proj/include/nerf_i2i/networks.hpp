#pragma once

#include <vector>

#include "nerf_i2i/common.hpp"

namespace nerf_i2i {

/// MLP with leaky-ReLU(0.2) between layers and a linear last layer.
class MappingNetworkImpl : public torch::nn::Module {
public:
    MappingNetworkImpl(std::int64_t in_dim, std::int64_t hidden, std::int64_t out_dim, std::int64_t n_layers);

    torch::Tensor forward(const torch::Tensor& x);

    std::int64_t in_dim() const { return in_dim_; }
    std::int64_t out_dim() const { return out_dim_; }

    torch::nn::ModuleList layers{nullptr};

private:
    std::int64_t in_dim_;
    std::int64_t out_dim_;
};
TORCH_MODULE(MappingNetwork);

/// Learned class embeddings e_l. Labels are 1-based: l in {1..L}.
class ClassEmbeddingImpl : public torch::nn::Module {
public:
    ClassEmbeddingImpl(std::int64_t num_classes, std::int64_t dim);

    /// labels: [N] int64 in {1..L}. Throws LabelError otherwise.
    torch::Tensor forward(const torch::Tensor& labels);

    /// (1 - alpha) e_a + alpha e_b, alpha in [0, 1].
    torch::Tensor mix(std::int64_t label_a, std::int64_t label_b, double alpha);

    std::int64_t num_classes() const { return num_classes_; }

    torch::Tensor weight;

private:
    std::int64_t num_classes_;
};
TORCH_MODULE(ClassEmbedding);

/// Throws LabelError unless every label lies in {1..num_classes}.
void check_labels(const torch::Tensor& labels, std::int64_t num_classes);

/// Style-modulated convolution (modulation + optional demodulation, grouped over the batch).
class ModulatedConv2dImpl : public torch::nn::Module {
public:
    ModulatedConv2dImpl(std::int64_t in_ch, std::int64_t out_ch, std::int64_t kernel, std::int64_t style_dim,
                        bool demodulate = true);

    torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& w);

    torch::Tensor weight;
    torch::Tensor bias;
    torch::nn::Linear affine{nullptr};

private:
    std::int64_t in_ch_, out_ch_, kernel_;
    bool demodulate_;
};
TORCH_MODULE(ModulatedConv2d);

/// Upsampling ResBlock: x2 bilinear upsample, two modulated 3x3 convs, 1x1 skip.
class GeneratorBlockImpl : public torch::nn::Module {
public:
    GeneratorBlockImpl(std::int64_t in_ch, std::int64_t out_ch, std::int64_t style_dim);
    torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& w);

    ModulatedConv2d conv1{nullptr}, conv2{nullptr};
    torch::nn::Conv2d skip{nullptr};
};
TORCH_MODULE(GeneratorBlock);

struct SynthesisOutput {
    torch::Tensor image;                ///< [N, 3, H, W], values in [-1, 1]
    std::vector<torch::Tensor> blocks;  ///< G_k, k = 1..n_blocks
};

/// Style-based upsampling generator G(f, w1, w2).
///
/// Blocks below the midpoint (2k < n_blocks) are modulated by w1, the rest and the
/// RGB head by w2. An unconditional generator is the same network driven with w2 = w1.
class GeneratorImpl : public torch::nn::Module {
public:
    /// channels[0] is the feature-map channel count; each following entry is one block.
    GeneratorImpl(std::vector<std::int64_t> channels, std::int64_t style_dim);

    SynthesisOutput forward(const torch::Tensor& f, const torch::Tensor& w1, const torch::Tensor& w2);

    std::int64_t n_blocks() const { return static_cast<std::int64_t>(blocks->size()); }
    bool block_uses_w1(std::int64_t k) const { return 2 * k < n_blocks(); }

    torch::nn::ModuleList blocks{nullptr};
    ModulatedConv2d to_rgb{nullptr};

private:
    std::vector<std::int64_t> channels_;
    std::int64_t style_dim_;
};
TORCH_MODULE(Generator);

/// Downsampling ResBlock: two 3x3 convs then 2x2 average pool, pooled 1x1 skip.
class DiscriminatorBlockImpl : public torch::nn::Module {
public:
    DiscriminatorBlockImpl(std::int64_t in_ch, std::int64_t out_ch);
    torch::Tensor forward(const torch::Tensor& x);

    torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, skip{nullptr};
};
TORCH_MODULE(DiscriminatorBlock);

/// Discriminator main network (from-RGB + halving blocks). Also the encoder E.
class DiscriminatorTrunkImpl : public torch::nn::Module {
public:
    /// channels[0] is the from-RGB width; each following entry is one halving block.
    DiscriminatorTrunkImpl(std::vector<std::int64_t> channels, std::int64_t image_resolution);

    torch::Tensor forward(const torch::Tensor& image);

    std::int64_t out_channels() const { return channels_.back(); }
    std::int64_t out_resolution() const;
    std::int64_t image_resolution() const { return image_resolution_; }
    const std::vector<std::int64_t>& channels() const { return channels_; }

    torch::nn::Conv2d from_rgb{nullptr};
    torch::nn::ModuleList blocks{nullptr};

private:
    std::vector<std::int64_t> channels_;
    std::int64_t image_resolution_;
};
TORCH_MODULE(DiscriminatorTrunk);

struct DiscriminatorOutput {
    torch::Tensor scores;          ///< [N, L]
    torch::Tensor trunk_features;  ///< [N, C, h, w]
};

/// Multi-head discriminator: trunk -> head conv -> final conv with L output channels.
class DiscriminatorImpl : public torch::nn::Module {
public:
    DiscriminatorImpl(std::vector<std::int64_t> channels, std::int64_t image_resolution, std::int64_t n_outputs);

    DiscriminatorOutput forward(const torch::Tensor& image);

    std::int64_t n_outputs() const { return n_outputs_; }

    DiscriminatorTrunk trunk{nullptr};
    torch::nn::Conv2d head{nullptr};
    torch::nn::Conv2d out{nullptr};

private:
    std::int64_t n_outputs_;
};
TORCH_MODULE(Discriminator);

/// normal(0, 0.02) weights, zero bias, applied to every Linear/Conv2d/Embedding-like tensor.
void init_fresh(torch::nn::Module& module, torch::Generator& gen);

}  // namespace nerf_i2i
