#pragma once

#include <filesystem>
#include <functional>
#include <optional>

#include "nerf_i2i/camera.hpp"
#include "nerf_i2i/field.hpp"

namespace nerf_i2i {

struct RenderConfig {
    std::int64_t n_samples = 32;
    bool stratified = false;
    double t_near = 2.0;
    double t_far = 6.0;
    std::int64_t height = 16;
    std::int64_t width = 16;

    void validate() const;
};

/// Alpha-compositing result for a batch of rays.
struct CompositeResult {
    torch::Tensor features;  ///< [R, C]
    torch::Tensor weights;   ///< [R, S]
};

/// Discrete volume-rendering quadrature along each ray:
/// alpha_i = 1 - exp(-sigma_i delta_i), p_i = alpha_i prod_{j<i} (1 - alpha_j), f = sum_i p_i c_i.
/// sigma, deltas: [R, S]; features: [R, S, C].
CompositeResult composite(const torch::Tensor& sigma, const torch::Tensor& features,
                          const torch::Tensor& deltas);

/// Sample depths [R, S] and matching interval lengths [R, S] in [t_near, t_far].
/// Deterministic mode uses the left edges of S equal bins; stratified mode jitters
/// uniformly inside each bin. delta_i = t_{i+1} - t_i with t_S := t_far.
std::pair<torch::Tensor, torch::Tensor> sample_depths(std::int64_t n_rays, const RenderConfig& cfg,
                                                      torch::Dtype dtype,
                                                      torch::Generator* gen = nullptr);

/// Any field callable: positions/directions [N, P, 3] -> features [N, P, C], sigma [N, P].
using FieldFn = std::function<FieldSample(const torch::Tensor&, const torch::Tensor&)>;

struct RenderOutput {
    torch::Tensor feature_map;  ///< [N, C, H, W]
    torch::Tensor weights;      ///< [N, H, W, S]
};

/// Renders one feature map per pose. Throws NumericError naming the first ray whose
/// field output is non-finite.
RenderOutput render(const std::vector<CameraPose>& poses, const FieldFn& field,
                    const RenderConfig& cfg, torch::Dtype dtype = torch::kFloat32,
                    torch::Generator* gen = nullptr);

/// f = render of the style-conditioned field F(., ., w1); w1 is [N, style_dim].
torch::Tensor render_feature_map(FeatureField& field, const std::vector<CameraPose>& poses,
                                 const torch::Tensor& w1, const RenderConfig& cfg,
                                 torch::Generator* gen = nullptr);

/// NeRF-path regularizer: mean L1 between the RGB projection of f and the box-downsampled
/// image at `n_positions` seeded feature-grid positions (all positions when n_positions
/// covers the grid). f: [N, C, H, W]; image: [N, 3, kH, kW].
torch::Tensor nerf_path_loss(const torch::Tensor& feature_map, const torch::Tensor& image,
                             const std::function<torch::Tensor(const torch::Tensor&)>& projection,
                             std::int64_t n_positions, std::uint64_t seed);

/// Debug dump: <stem>.f32le (raw little-endian float32, NCHW) + <stem>.json shape sidecar.
void dump_feature_map(const torch::Tensor& feature_map, const std::filesystem::path& stem);
torch::Tensor load_feature_map(const std::filesystem::path& stem);

}  // namespace nerf_i2i
