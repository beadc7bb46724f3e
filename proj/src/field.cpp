#include "nerf_i2i/field.hpp"

namespace F = torch::nn::functional;

namespace nerf_i2i {

torch::Tensor positional_encoding(const torch::Tensor& x, std::int64_t n_freqs) {
    std::vector<torch::Tensor> parts{x};
    parts.reserve(1 + 2 * n_freqs);
    for (std::int64_t k = 0; k < n_freqs; ++k) {
        const double freq = static_cast<double>(1LL << k);
        parts.push_back(torch::sin(x * freq));
        parts.push_back(torch::cos(x * freq));
    }
    return torch::cat(parts, -1);
}

FeatureFieldImpl::FeatureFieldImpl(FieldConfig cfg) : cfg_(cfg) {
    if (cfg_.layers < 1 || cfg_.hidden < 1 || cfg_.feature_channels < 1)
        throw ConfigError("field: layers, hidden and feature_channels must be positive");
    const std::int64_t pos_dim = 3 * (1 + 2 * cfg_.pos_freqs);
    const std::int64_t dir_dim = 3 * (1 + 2 * cfg_.dir_freqs);

    layers = register_module("layers", torch::nn::ModuleList());
    film = register_module("film", torch::nn::ModuleList());
    for (std::int64_t i = 0; i < cfg_.layers; ++i) {
        layers->push_back(torch::nn::Linear(i == 0 ? pos_dim : cfg_.hidden, cfg_.hidden));
        // (scale, shift) pair, small init so modulation starts near identity.
        torch::nn::Linear affine(cfg_.style_dim, 2 * cfg_.hidden);
        torch::NoGradGuard guard;
        affine->weight.normal_(0.0, 0.02);
        affine->bias.zero_();
        film->push_back(affine);
    }
    sigma_head = register_module("sigma_head", torch::nn::Linear(cfg_.hidden, 1));
    feature_hidden = register_module("feature_hidden", torch::nn::Linear(cfg_.hidden + dir_dim, cfg_.hidden));
    feature_head = register_module("feature_head", torch::nn::Linear(cfg_.hidden, cfg_.feature_channels));
    rgb_head = register_module("rgb_head", torch::nn::Linear(cfg_.feature_channels, 3));
}

FieldSample FeatureFieldImpl::forward(const torch::Tensor& x, const torch::Tensor& d,
                                      const torch::Tensor& w) {
    expect_shape(x, {-1, -1, 3}, "field positions");
    expect_shape(d, {x.size(0), x.size(1), 3}, "field directions");
    expect_shape(w, {x.size(0), cfg_.style_dim}, "field style");

    auto h = positional_encoding(x, cfg_.pos_freqs);
    for (std::size_t i = 0; i < layers->size(); ++i) {
        h = layers[i]->as<torch::nn::Linear>()->forward(h);
        auto mod = film[i]->as<torch::nn::Linear>()->forward(w).unsqueeze(1);  // [N, 1, 2H]
        auto parts = mod.chunk(2, -1);
        h = F::leaky_relu(h * (1.0 + parts[0]) + parts[1], F::LeakyReLUFuncOptions().negative_slope(0.2));
    }
    auto sigma = F::softplus(sigma_head->forward(h)).squeeze(-1);
    auto hd = torch::cat({h, positional_encoding(d, cfg_.dir_freqs)}, -1);
    hd = F::leaky_relu(feature_hidden->forward(hd), F::LeakyReLUFuncOptions().negative_slope(0.2));
    return {feature_head->forward(hd), sigma};
}

FieldSample FeatureFieldImpl::eval_point(const torch::Tensor& x, const torch::Tensor& d,
                                         const torch::Tensor& w) {
    expect_shape(x, {3}, "field position");
    expect_shape(d, {3}, "field direction");
    expect_shape(w, {cfg_.style_dim}, "field style");
    auto out = forward(x.view({1, 1, 3}), d.view({1, 1, 3}), w.view({1, -1}));
    return {out.features.view({cfg_.feature_channels}), out.sigma.view({})};
}

torch::Tensor FeatureFieldImpl::project_rgb(const torch::Tensor& feature_map) {
    expect_shape(feature_map, {-1, cfg_.feature_channels, -1, -1}, "feature map");
    return rgb_head->forward(feature_map.permute({0, 2, 3, 1})).permute({0, 3, 1, 2});
}

}  // namespace nerf_i2i
