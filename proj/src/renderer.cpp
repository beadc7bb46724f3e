#include "nerf_i2i/renderer.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

namespace nerf_i2i {

void RenderConfig::validate() const {
    if (n_samples < 2) throw ConfigError("render: n_samples must be >= 2, got " + std::to_string(n_samples));
    if (!(t_near >= 0.0 && t_near < t_far)) throw ConfigError("render: need 0 <= t_near < t_far");
    if (height < 1 || width < 1) throw ConfigError("render: feature resolution must be >= 1");
}

CompositeResult composite(const torch::Tensor& sigma, const torch::Tensor& features,
                          const torch::Tensor& deltas) {
    expect_shape(sigma, {-1, -1}, "composite sigma");
    expect_shape(deltas, {sigma.size(0), sigma.size(1)}, "composite deltas");
    expect_shape(features, {sigma.size(0), sigma.size(1), -1}, "composite features");

    auto tau = sigma * deltas;
    auto alpha = 1.0 - torch::exp(-tau);
    // Transmittance prod_{j<i}(1 - alpha_j) == exp(-sum_{j<i} tau_j).
    auto transmittance = torch::exp(-(torch::cumsum(tau, -1) - tau));
    auto weights = alpha * transmittance;
    auto feats = (weights.unsqueeze(-1) * features).sum(1);
    return {feats, weights};
}

std::pair<torch::Tensor, torch::Tensor> sample_depths(std::int64_t n_rays, const RenderConfig& cfg,
                                                      torch::Dtype dtype, torch::Generator* gen) {
    cfg.validate();
    const auto opts = torch::TensorOptions().dtype(dtype);
    const double bin = (cfg.t_far - cfg.t_near) / static_cast<double>(cfg.n_samples);
    auto edges = (torch::arange(cfg.n_samples, opts) * bin + cfg.t_near).expand({n_rays, cfg.n_samples});
    torch::Tensor t;
    if (cfg.stratified) {
        auto u = gen ? torch::rand({n_rays, cfg.n_samples}, *gen, opts) : torch::rand({n_rays, cfg.n_samples}, opts);
        t = edges + u * bin;
    } else {
        t = edges.contiguous();
    }
    auto far = torch::full({n_rays, 1}, cfg.t_far, opts);
    auto deltas = torch::cat({t.slice(1, 1), far}, 1) - t;
    return {t, deltas};
}

RenderOutput render(const std::vector<CameraPose>& poses, const FieldFn& field,
                    const RenderConfig& cfg, torch::Dtype dtype, torch::Generator* gen) {
    cfg.validate();
    if (poses.empty()) throw ConfigError("render: no poses");
    const auto n = static_cast<std::int64_t>(poses.size());
    const std::int64_t rays_per_view = cfg.height * cfg.width;
    const std::int64_t s = cfg.n_samples;

    std::vector<torch::Tensor> origins;
    std::vector<torch::Tensor> dirs;
    for (const auto& pose : poses) {
        auto grid = generate_rays(pose, cfg.height, cfg.width, cfg.t_near, cfg.t_far, dtype);
        origins.push_back(grid.origins.reshape({rays_per_view, 3}));
        dirs.push_back(grid.directions.reshape({rays_per_view, 3}));
    }
    auto o = torch::stack(origins);  // [N, R, 3]
    auto d = torch::stack(dirs);
    auto [t, deltas] = sample_depths(n * rays_per_view, cfg, dtype, gen);
    t = t.view({n, rays_per_view, s});

    auto pts = (o.unsqueeze(2) + d.unsqueeze(2) * t.unsqueeze(-1)).reshape({n, rays_per_view * s, 3});
    auto view_dirs = d.unsqueeze(2).expand({n, rays_per_view, s, 3}).reshape({n, rays_per_view * s, 3});
    auto out = field(pts, view_dirs);
    expect_shape(out.sigma, {n, rays_per_view * s}, "field sigma");
    expect_shape(out.features, {n, rays_per_view * s, -1}, "field features");
    const std::int64_t c = out.features.size(-1);

    auto ok = torch::isfinite(out.sigma) & torch::isfinite(out.features).all(-1);
    if (!ok.all().item<bool>()) {
        const auto bad = torch::nonzero(~ok.reshape({-1})).index({0, 0}).item<std::int64_t>();
        throw NumericError("render: non-finite field output at ray " + std::to_string(bad / s));
    }

    auto comp = composite(out.sigma.reshape({n * rays_per_view, s}),
                          out.features.reshape({n * rays_per_view, s, c}), deltas);
    RenderOutput result;
    result.feature_map = comp.features.view({n, cfg.height, cfg.width, c}).permute({0, 3, 1, 2}).contiguous();
    result.weights = comp.weights.view({n, cfg.height, cfg.width, s});
    return result;
}

torch::Tensor render_feature_map(FeatureField& field, const std::vector<CameraPose>& poses,
                                 const torch::Tensor& w1, const RenderConfig& cfg, torch::Generator* gen) {
    expect_shape(w1, {static_cast<std::int64_t>(poses.size()), field->config().style_dim}, "render style");
    auto fn = [&](const torch::Tensor& x, const torch::Tensor& d) { return field->forward(x, d, w1); };
    return render(poses, fn, cfg, w1.scalar_type(), gen).feature_map;
}

torch::Tensor nerf_path_loss(const torch::Tensor& feature_map, const torch::Tensor& image,
                             const std::function<torch::Tensor(const torch::Tensor&)>& projection,
                             std::int64_t n_positions, std::uint64_t seed) {
    expect_shape(feature_map, {-1, -1, -1, -1}, "path loss feature map");
    expect_shape(image, {feature_map.size(0), 3, -1, -1}, "path loss image");
    const auto h = feature_map.size(2);
    const auto w = feature_map.size(3);
    if (image.size(2) % h != 0 || image.size(3) % w != 0 || image.size(2) / h != image.size(3) / w)
        throw ShapeError("path loss: image " + shape_str(image) + " not divisible down to " +
                         std::to_string(h) + "x" + std::to_string(w));
    if (n_positions < 1) throw ConfigError("path loss: n_positions must be >= 1");

    const auto factor = image.size(2) / h;
    auto target = torch::avg_pool2d(image, {factor, factor});
    auto pred = projection(feature_map);
    expect_shape(pred, {feature_map.size(0), 3, h, w}, "path loss projection");

    auto diff = (pred - target).abs().flatten(2);  // [N, 3, H*W]
    if (n_positions >= h * w) return diff.mean();

    std::vector<std::int64_t> idx(static_cast<std::size_t>(h * w));
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(static_cast<std::size_t>(n_positions));
    std::sort(idx.begin(), idx.end());
    auto sel = torch::tensor(idx, torch::kLong);
    return diff.index_select(2, sel).mean();
}

void dump_feature_map(const torch::Tensor& feature_map, const std::filesystem::path& stem) {
    write_f32le(stem.string() + ".f32le", feature_map);
    nlohmann::json meta{{"shape", feature_map.sizes().vec()}, {"layout", "NCHW"}, {"dtype", "float32le"}};
    std::ofstream out(stem.string() + ".json");
    if (!out) throw IoError("cannot write " + stem.string() + ".json");
    out << meta.dump(2) << "\n";
}

torch::Tensor load_feature_map(const std::filesystem::path& stem) {
    std::ifstream in(stem.string() + ".json");
    if (!in) throw IoError("cannot read " + stem.string() + ".json");
    const auto meta = nlohmann::json::parse(in);
    return read_f32le(stem.string() + ".f32le", meta.at("shape").get<std::vector<std::int64_t>>());
}

}  // namespace nerf_i2i
