#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "nerf_i2i/common.hpp"

namespace nerf_i2i {

/// Image -> multi-scale feature maps and a pooled embedding. Images are [N, 3, H, W] in [0, 1].
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;

    virtual std::string id() const = 0;
    virtual std::vector<torch::Tensor> feature_maps(const torch::Tensor& images) = 0;

    /// [N, D]; default is the spatial mean of every scale, concatenated.
    virtual torch::Tensor pooled(const torch::Tensor& images);

    /// Perceptual distance between the feature maps of two single images (each map [C, h, w]).
    /// Default: mean over scales of the mean squared difference of channel-unit-normalized maps.
    virtual double distance(const std::vector<torch::Tensor>& a, const std::vector<torch::Tensor>& b);
};

/// Fixed random conv pyramid: `scales` stride-2 3x3 convs with leaky-ReLU, `channels` each,
/// weights drawn from `seed`. Pooled dimension = scales * channels.
class RandomConvExtractor : public FeatureExtractor {
public:
    explicit RandomConvExtractor(std::uint64_t seed = 0, std::int64_t channels = 64, std::int64_t scales = 3);

    std::string id() const override;
    std::vector<torch::Tensor> feature_maps(const torch::Tensor& images) override;

private:
    std::uint64_t seed_;
    std::vector<torch::Tensor> weights_;
};

struct MetricProtocol {
    std::vector<std::int64_t> intervals{1, 2, 4};
    std::int64_t max_pairs = 100;
    std::uint64_t seed = 0;
    double diversity_floor = 1e-4;

    void validate() const;
};

/// Throws RangeError unless every value lies in [0, 1].
void check_unit_range(const torch::Tensor& images, const std::string& what);

/// [-1, 1] model output -> [0, 1].
torch::Tensor to_unit_range(const torch::Tensor& images);

/// Mean over intervals of the mean over t of ||I_{t+d} - I_t||_F / sqrt(HWC). frames: [T, 3, H, W].
double temporal_loss(const torch::Tensor& frames, const std::vector<std::int64_t>& intervals = {1, 2, 4});

/// Frame pairs (i < j) used by video_lpips: all of them, or `max_pairs` drawn without replacement.
std::vector<std::pair<std::int64_t, std::int64_t>> lpips_pairs(std::int64_t n_frames, std::int64_t max_pairs,
                                                               std::uint64_t seed);

/// Mean perceptual distance over the pairs from lpips_pairs.
double video_lpips(const torch::Tensor& frames, FeatureExtractor& extractor, std::int64_t max_pairs = 100,
                   std::uint64_t seed = 0);

struct ConsistencyEntry {
    double tl;
    double vlpips;
    double tc;
};

/// TC = TL / vLPIPS; throws DiversityError when vLPIPS < floor.
double tc_ratio(double tl, double vlpips, double floor = 1e-4);
ConsistencyEntry temporal_consistency(const torch::Tensor& frames, FeatureExtractor& extractor,
                                      const MetricProtocol& protocol = {});

/// Frechet distance between Gaussian fits of two feature sets [n, D] (computed in double,
/// 1e-6 I added to each covariance, negative eigenvalues clamped).
double fid(const torch::Tensor& features_a, const torch::Tensor& features_b);

/// Full report: mean TC over `videos` (each [T, 3, H, W] in [0, 1]) and FID between
/// the translated and real image sets (omitted when either is empty). Videos under the
/// diversity floor are listed in protocol.excluded and left out of the means.
nlohmann::json eval_report(const std::vector<torch::Tensor>& videos, const torch::Tensor& real_images,
                           const torch::Tensor& translated_images, FeatureExtractor& extractor,
                           const MetricProtocol& protocol = {});

}  // namespace nerf_i2i
