#include "nerf_i2i/networks.hpp"

#include <cmath>

namespace F = torch::nn::functional;

namespace nerf_i2i {

namespace {

torch::Tensor lrelu(const torch::Tensor& x) {
    return F::leaky_relu(x, F::LeakyReLUFuncOptions().negative_slope(0.2));
}

// "Same" padding for odd kernels, valid padding otherwise.
torch::nn::Conv2d conv(std::int64_t in, std::int64_t out, std::int64_t k, std::int64_t stride = 1,
                       bool bias = true) {
    return torch::nn::Conv2d(
        torch::nn::Conv2dOptions(in, out, k).stride(stride).padding(k % 2 == 1 ? k / 2 : 0).bias(bias));
}

}  // namespace

MappingNetworkImpl::MappingNetworkImpl(std::int64_t in_dim, std::int64_t hidden, std::int64_t out_dim,
                                       std::int64_t n_layers)
    : in_dim_(in_dim), out_dim_(out_dim) {
    if (n_layers < 1) throw ConfigError("mapping network needs at least one layer");
    layers = register_module("layers", torch::nn::ModuleList());
    for (std::int64_t i = 0; i < n_layers; ++i) {
        const auto in = i == 0 ? in_dim : hidden;
        const auto out = i + 1 == n_layers ? out_dim : hidden;
        layers->push_back(torch::nn::Linear(in, out));
    }
}

torch::Tensor MappingNetworkImpl::forward(const torch::Tensor& x) {
    expect_shape(x, {-1, in_dim_}, "mapping input");
    auto h = x;
    for (std::size_t i = 0; i < layers->size(); ++i) {
        h = layers[i]->as<torch::nn::Linear>()->forward(h);
        if (i + 1 < layers->size()) h = lrelu(h);
    }
    return h;
}

ClassEmbeddingImpl::ClassEmbeddingImpl(std::int64_t num_classes, std::int64_t dim) : num_classes_(num_classes) {
    if (num_classes < 1) throw ConfigError("class embedding needs L >= 1");
    weight = register_parameter("weight", torch::randn({num_classes, dim}));
}

void check_labels(const torch::Tensor& labels, std::int64_t num_classes) {
    if (labels.scalar_type() != torch::kLong) throw LabelError("labels must be int64");
    if (labels.numel() == 0) return;
    const auto lo = labels.min().item<std::int64_t>();
    const auto hi = labels.max().item<std::int64_t>();
    if (lo < 1 || hi > num_classes)
        throw LabelError("label out of range {1.." + std::to_string(num_classes) + "}: got " +
                         std::to_string(lo < 1 ? lo : hi));
}

torch::Tensor ClassEmbeddingImpl::forward(const torch::Tensor& labels) {
    check_labels(labels, num_classes_);
    return weight.index_select(0, labels.reshape({-1}) - 1);
}

torch::Tensor ClassEmbeddingImpl::mix(std::int64_t label_a, std::int64_t label_b, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw RangeError("interpolation alpha must lie in [0, 1]");
    auto e = forward(torch::tensor({label_a, label_b}, torch::kLong));
    return (1.0 - alpha) * e[0] + alpha * e[1];
}

ModulatedConv2dImpl::ModulatedConv2dImpl(std::int64_t in_ch, std::int64_t out_ch, std::int64_t kernel,
                                         std::int64_t style_dim, bool demodulate)
    : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), demodulate_(demodulate) {
    const double fan_in = static_cast<double>(in_ch * kernel * kernel);
    weight = register_parameter("weight", torch::randn({out_ch, in_ch, kernel, kernel}) / std::sqrt(fan_in));
    bias = register_parameter("bias", torch::zeros({out_ch}));
    affine = register_module("affine", torch::nn::Linear(style_dim, in_ch));
    torch::NoGradGuard guard;
    affine->bias.fill_(1.0);
}

torch::Tensor ModulatedConv2dImpl::forward(const torch::Tensor& x, const torch::Tensor& w) {
    expect_shape(x, {-1, in_ch_, -1, -1}, "modulated conv input");
    const auto n = x.size(0);
    expect_shape(w, {n, affine->options.in_features()}, "modulated conv style");

    auto s = affine->forward(w);  // [N, in]
    auto wgt = weight.unsqueeze(0) * s.view({n, 1, in_ch_, 1, 1});
    if (demodulate_) {
        auto d = torch::rsqrt(wgt.pow(2).sum({2, 3, 4}) + 1e-8);
        wgt = wgt * d.view({n, out_ch_, 1, 1, 1});
    }
    auto y = F::conv2d(x.reshape({1, n * in_ch_, x.size(2), x.size(3)}),
                       wgt.reshape({n * out_ch_, in_ch_, kernel_, kernel_}),
                       F::Conv2dFuncOptions().padding(kernel_ / 2).groups(n));
    return y.view({n, out_ch_, x.size(2), x.size(3)}) + bias.view({1, -1, 1, 1});
}

GeneratorBlockImpl::GeneratorBlockImpl(std::int64_t in_ch, std::int64_t out_ch, std::int64_t style_dim) {
    conv1 = register_module("conv1", ModulatedConv2d(in_ch, out_ch, 3, style_dim));
    conv2 = register_module("conv2", ModulatedConv2d(out_ch, out_ch, 3, style_dim));
    skip = register_module("skip", conv(in_ch, out_ch, 1, 1, false));
}

torch::Tensor GeneratorBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& w) {
    auto up = F::interpolate(x, F::InterpolateFuncOptions()
                                    .scale_factor(std::vector<double>{2.0, 2.0})
                                    .mode(torch::kBilinear)
                                    .align_corners(false));
    auto h = lrelu(conv1->forward(up, w));
    h = lrelu(conv2->forward(h, w));
    return (h + skip->forward(up)) * M_SQRT1_2;
}

GeneratorImpl::GeneratorImpl(std::vector<std::int64_t> channels, std::int64_t style_dim)
    : channels_(std::move(channels)), style_dim_(style_dim) {
    if (channels_.size() < 2) throw ConfigError("generator needs at least one block");
    blocks = register_module("blocks", torch::nn::ModuleList());
    for (std::size_t k = 0; k + 1 < channels_.size(); ++k)
        blocks->push_back(GeneratorBlock(channels_[k], channels_[k + 1], style_dim));
    to_rgb = register_module("to_rgb", ModulatedConv2d(channels_.back(), 3, 1, style_dim, false));
}

SynthesisOutput GeneratorImpl::forward(const torch::Tensor& f, const torch::Tensor& w1, const torch::Tensor& w2) {
    expect_shape(f, {-1, channels_.front(), -1, -1}, "generator input");
    expect_shape(w1, {f.size(0), style_dim_}, "generator w1");
    expect_shape(w2, {f.size(0), style_dim_}, "generator w2");
    SynthesisOutput out;
    auto h = f;
    for (std::int64_t k = 0; k < n_blocks(); ++k) {
        h = blocks[k]->as<GeneratorBlock>()->forward(h, block_uses_w1(k) ? w1 : w2);
        out.blocks.push_back(h);
    }
    out.image = torch::tanh(to_rgb->forward(h, w2));
    return out;
}

DiscriminatorBlockImpl::DiscriminatorBlockImpl(std::int64_t in_ch, std::int64_t out_ch) {
    conv1 = register_module("conv1", conv(in_ch, in_ch, 3));
    conv2 = register_module("conv2", conv(in_ch, out_ch, 3));
    skip = register_module("skip", conv(in_ch, out_ch, 1, 1, false));
}

torch::Tensor DiscriminatorBlockImpl::forward(const torch::Tensor& x) {
    auto h = lrelu(conv1->forward(x));
    h = torch::avg_pool2d(lrelu(conv2->forward(h)), {2, 2});
    return (h + skip->forward(torch::avg_pool2d(x, {2, 2}))) * M_SQRT1_2;
}

DiscriminatorTrunkImpl::DiscriminatorTrunkImpl(std::vector<std::int64_t> channels, std::int64_t image_resolution)
    : channels_(std::move(channels)), image_resolution_(image_resolution) {
    if (channels_.size() < 2) throw ConfigError("discriminator needs at least one block");
    if (image_resolution_ % (1LL << (channels_.size() - 1)) != 0)
        throw ConfigError("discriminator: image resolution not divisible by 2^blocks");
    from_rgb = register_module("from_rgb", conv(3, channels_.front(), 1));
    blocks = register_module("blocks", torch::nn::ModuleList());
    for (std::size_t k = 0; k + 1 < channels_.size(); ++k)
        blocks->push_back(DiscriminatorBlock(channels_[k], channels_[k + 1]));
}

std::int64_t DiscriminatorTrunkImpl::out_resolution() const {
    return image_resolution_ >> (channels_.size() - 1);
}

torch::Tensor DiscriminatorTrunkImpl::forward(const torch::Tensor& image) {
    expect_shape(image, {-1, 3, image_resolution_, image_resolution_}, "discriminator input");
    auto h = lrelu(from_rgb->forward(image));
    for (const auto& block : *blocks) h = block->as<DiscriminatorBlock>()->forward(h);
    return h;
}

DiscriminatorImpl::DiscriminatorImpl(std::vector<std::int64_t> channels, std::int64_t image_resolution,
                                     std::int64_t n_outputs)
    : n_outputs_(n_outputs) {
    if (n_outputs < 1) throw ConfigError("discriminator needs >= 1 output");
    trunk = register_module("trunk", DiscriminatorTrunk(std::move(channels), image_resolution));
    const auto res = trunk->out_resolution();
    const auto stride = std::min<std::int64_t>(4, res);
    if (res % stride != 0) throw ConfigError("discriminator: trunk resolution must be divisible by its head stride");
    const auto c = trunk->out_channels();
    head = register_module("head", torch::nn::Conv2d(torch::nn::Conv2dOptions(c, c, stride).stride(stride)));
    out = register_module("out", torch::nn::Conv2d(torch::nn::Conv2dOptions(c, n_outputs, res / stride)));
}

DiscriminatorOutput DiscriminatorImpl::forward(const torch::Tensor& image) {
    auto feats = trunk->forward(image);
    auto h = lrelu(head->forward(feats));
    return {out->forward(h).flatten(1), feats};
}

void init_fresh(torch::nn::Module& module, torch::Generator& gen) {
    torch::NoGradGuard guard;
    for (auto& m : module.modules(/*include_self=*/true)) {
        if (m->as<torch::nn::BatchNorm2d>()) continue;
        for (auto& p : m->named_parameters(/*recurse=*/false)) {
            if (p.key() == "bias")
                p.value().zero_();
            else
                p.value().normal_(0.0, 0.02, gen);
        }
    }
}

}  // namespace nerf_i2i
