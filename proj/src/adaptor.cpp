#include "nerf_i2i/adaptor.hpp"

namespace nn = torch::nn;

namespace nerf_i2i {

namespace {

void reject_degenerate_batch(const nn::Module& m, const torch::Tensor& x) {
    if (m.is_training() && x.size(0) < 2)
        throw ConfigError("adaptor: batch-norm in training mode needs a batch of at least 2 (got " +
                          std::to_string(x.size(0)) + "); use eval() for single images");
}

}  // namespace

void AdaptorConfig::validate() const {
    if (kind != "unet" && kind != "plain") throw ConfigError("adaptor.kind must be 'unet' or 'plain', got '" + kind + "'");
    if (in_channels < 1 || out_channels < 1 || plain_width < 1) throw ConfigError("adaptor: channel counts must be >= 1");
    if (kind == "unet" && unet_depth(resolution) < 1)
        throw ConfigError("adaptor: resolution " + std::to_string(resolution) + " too small for a U-net");
    if (kind == "unet" && resolution % (1LL << unet_depth(resolution)) != 0)
        throw ConfigError("adaptor: resolution must be divisible by 2^depth");
}

nlohmann::json AdaptorConfig::to_json() const {
    return {{"kind", kind},
            {"in_channels", in_channels},
            {"out_channels", out_channels},
            {"resolution", resolution},
            {"plain_width", plain_width}};
}

AdaptorConfig AdaptorConfig::from_json(const nlohmann::json& j) {
    AdaptorConfig c;
    try {
        c.kind = j.at("kind").get<std::string>();
        c.in_channels = j.at("in_channels").get<std::int64_t>();
        c.out_channels = j.at("out_channels").get<std::int64_t>();
        c.resolution = j.at("resolution").get<std::int64_t>();
        c.plain_width = j.at("plain_width").get<std::int64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("adaptor config: ") + e.what());
    }
    c.validate();
    return c;
}

std::int64_t unet_depth(std::int64_t resolution) {
    std::int64_t depth = 0;
    while (resolution > 2 && resolution % 2 == 0 && depth < 5) {
        resolution /= 2;
        ++depth;
    }
    return depth;
}

UNetAdaptorImpl::UNetAdaptorImpl(const AdaptorConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const auto n = unet_depth(cfg_.resolution);
    enc_channels_.assign(std::begin(kUNetLadder), std::begin(kUNetLadder) + n);

    down = register_module("down", nn::ModuleList());
    std::int64_t in = cfg_.in_channels;
    for (auto c : enc_channels_) {
        down->push_back(nn::Sequential(nn::Conv2d(nn::Conv2dOptions(in, c, 4).stride(2).padding(1)),
                                       nn::BatchNorm2d(c),
                                       nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2))));
        in = c;
    }

    up = register_module("up", nn::ModuleList());
    for (std::int64_t j = 0; j < n; ++j) {
        const auto in_ch = j == 0 ? enc_channels_.back() : dec_channels_.back() + enc_channels_[n - 1 - j];
        const bool last = j + 1 == n;
        const auto out_ch = last ? cfg_.out_channels : enc_channels_[n - 2 - j];
        auto deconv = nn::ConvTranspose2d(nn::ConvTranspose2dOptions(in_ch, out_ch, 4).stride(2).padding(1));
        if (last)
            up->push_back(nn::Sequential(deconv));
        else
            up->push_back(nn::Sequential(deconv, nn::BatchNorm2d(out_ch), nn::ReLU()));
        dec_channels_.push_back(out_ch);
    }
}

torch::Tensor UNetAdaptorImpl::forward(const torch::Tensor& features) {
    expect_shape(features, {-1, cfg_.in_channels, cfg_.resolution, cfg_.resolution}, "adaptor input");
    reject_degenerate_batch(*this, features);
    const auto n = static_cast<std::int64_t>(down->size());
    std::vector<torch::Tensor> skips;
    auto h = features;
    for (const auto& layer : *down) {
        h = layer->as<nn::Sequential>()->forward(h);
        skips.push_back(h);
    }
    for (std::int64_t j = 0; j < n; ++j) {
        auto in = j == 0 ? skips.back() : torch::cat({h, skips[static_cast<std::size_t>(n - 1 - j)]}, 1);
        h = up[j]->as<nn::Sequential>()->forward(in);
    }
    return h;
}

nlohmann::json UNetAdaptorImpl::describe() const {
    return {{"kind", "unet"},
            {"encoder", enc_channels_},
            {"decoder", dec_channels_},
            {"resolution", cfg_.resolution},
            {"full_ladder", static_cast<std::int64_t>(enc_channels_.size()) == 5}};
}

PlainAdaptorImpl::PlainAdaptorImpl(const AdaptorConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const auto w = cfg_.plain_width;
    body = register_module(
        "body", nn::Sequential(nn::Conv2d(nn::Conv2dOptions(cfg_.in_channels, w, 3).padding(1)), nn::BatchNorm2d(w),
                               nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)),
                               nn::Conv2d(nn::Conv2dOptions(w, w, 3).padding(1)), nn::BatchNorm2d(w),
                               nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2))));
    head = register_module("head", nn::Conv2d(nn::Conv2dOptions(w, cfg_.out_channels, 1)));
}

torch::Tensor PlainAdaptorImpl::forward(const torch::Tensor& features) {
    expect_shape(features, {-1, cfg_.in_channels, cfg_.resolution, cfg_.resolution}, "adaptor input");
    reject_degenerate_batch(*this, features);
    return head->forward(body->forward(features));
}

nlohmann::json PlainAdaptorImpl::describe() const {
    return {{"kind", "plain"}, {"width", cfg_.plain_width}, {"resolution", cfg_.resolution}};
}

std::shared_ptr<AdaptorImpl> make_adaptor(const AdaptorConfig& cfg) {
    cfg.validate();
    if (cfg.kind == "plain") return std::make_shared<PlainAdaptorImpl>(cfg);
    return std::make_shared<UNetAdaptorImpl>(cfg);
}

}  // namespace nerf_i2i
