#include "nerf_i2i/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace nerf_i2i {

namespace {

torch::Tensor unit_normalize(const torch::Tensor& m) {
    return m / (m.pow(2).sum(0, true).sqrt() + 1e-10);
}

}  // namespace

torch::Tensor FeatureExtractor::pooled(const torch::Tensor& images) {
    std::vector<torch::Tensor> parts;
    for (const auto& m : feature_maps(images)) parts.push_back(m.mean({2, 3}));
    return torch::cat(parts, 1);
}

double FeatureExtractor::distance(const std::vector<torch::Tensor>& a, const std::vector<torch::Tensor>& b) {
    if (a.size() != b.size() || a.empty()) throw ShapeError("feature distance: scale counts differ");
    double total = 0.0;
    for (std::size_t s = 0; s < a.size(); ++s)
        total += (unit_normalize(a[s]) - unit_normalize(b[s])).pow(2).mean().item<double>();
    return total / static_cast<double>(a.size());
}

RandomConvExtractor::RandomConvExtractor(std::uint64_t seed, std::int64_t channels, std::int64_t scales)
    : seed_(seed) {
    if (channels < 1 || scales < 1) throw ConfigError("feature extractor: channels and scales must be >= 1");
    auto gen = make_generator(sub_seed(seed, "extractor"));
    std::int64_t in = 3;
    for (std::int64_t s = 0; s < scales; ++s) {
        const double fan_in = static_cast<double>(in * 9);
        weights_.push_back(torch::randn({channels, in, 3, 3}, gen) * std::sqrt(2.0 / fan_in));
        in = channels;
    }
}

std::string RandomConvExtractor::id() const {
    return "random-conv-pyramid/c" + std::to_string(weights_.front().size(0)) + "x" +
           std::to_string(weights_.size()) + "/seed=" + std::to_string(seed_);
}

std::vector<torch::Tensor> RandomConvExtractor::feature_maps(const torch::Tensor& images) {
    torch::NoGradGuard no_grad;
    expect_shape(images, {-1, 3, -1, -1}, "extractor input");
    auto h = images.to(torch::kFloat32) * 2.0 - 1.0;
    std::vector<torch::Tensor> maps;
    for (const auto& w : weights_) {
        h = torch::leaky_relu(torch::conv2d(h, w, {}, 2, 1), 0.2);
        maps.push_back(h);
    }
    return maps;
}

void MetricProtocol::validate() const {
    if (intervals.empty()) throw ConfigError("metrics: intervals must be non-empty");
    for (auto d : intervals)
        if (d < 1) throw ConfigError("metrics: intervals must be >= 1");
    if (max_pairs < 1) throw ConfigError("metrics: max_pairs must be >= 1");
    if (!(diversity_floor >= 0.0)) throw ConfigError("metrics: diversity_floor must be >= 0");
}

void check_unit_range(const torch::Tensor& images, const std::string& what) {
    if (images.numel() == 0) return;
    const auto lo = images.min().item<double>();
    const auto hi = images.max().item<double>();
    if (!(lo >= 0.0 && hi <= 1.0))
        throw RangeError(what + ": pixel values must lie in [0, 1], got [" + std::to_string(lo) + ", " +
                         std::to_string(hi) + "]");
}

torch::Tensor to_unit_range(const torch::Tensor& images) { return ((images + 1.0) * 0.5).clamp(0.0, 1.0); }

double temporal_loss(const torch::Tensor& frames, const std::vector<std::int64_t>& intervals) {
    expect_shape(frames, {-1, -1, -1, -1}, "temporal_loss video");
    check_unit_range(frames, "temporal_loss");
    if (intervals.empty()) throw ProtocolError("temporal_loss: no intervals");
    const auto max_d = *std::max_element(intervals.begin(), intervals.end());
    const auto t = frames.size(0);
    if (t <= max_d)
        throw ProtocolError("temporal_loss: intervals up to " + std::to_string(max_d) + " need at least " +
                            std::to_string(max_d + 1) + " frames, got " + std::to_string(t));
    auto x = frames.to(torch::kFloat64).flatten(1);
    const double norm = std::sqrt(static_cast<double>(x.size(1)));
    double total = 0.0;
    for (auto d : intervals) {
        if (d < 1) throw ProtocolError("temporal_loss: intervals must be >= 1");
        auto diff = x.slice(0, d) - x.slice(0, 0, t - d);
        total += (diff.pow(2).sum(1).sqrt() / norm).mean().item<double>();
    }
    return total / static_cast<double>(intervals.size());
}

std::vector<std::pair<std::int64_t, std::int64_t>> lpips_pairs(std::int64_t n_frames, std::int64_t max_pairs,
                                                               std::uint64_t seed) {
    std::vector<std::pair<std::int64_t, std::int64_t>> pairs;
    for (std::int64_t i = 0; i < n_frames; ++i)
        for (std::int64_t j = i + 1; j < n_frames; ++j) pairs.emplace_back(i, j);
    if (static_cast<std::int64_t>(pairs.size()) > max_pairs) {
        std::mt19937_64 rng(seed);
        std::shuffle(pairs.begin(), pairs.end(), rng);
        pairs.resize(static_cast<std::size_t>(max_pairs));
        std::sort(pairs.begin(), pairs.end());
    }
    return pairs;
}

double video_lpips(const torch::Tensor& frames, FeatureExtractor& extractor, std::int64_t max_pairs,
                   std::uint64_t seed) {
    expect_shape(frames, {-1, 3, -1, -1}, "video_lpips video");
    check_unit_range(frames, "video_lpips");
    if (frames.size(0) < 2) throw ProtocolError("video_lpips: needs at least 2 frames");
    if (max_pairs < 1) throw ProtocolError("video_lpips: max_pairs must be >= 1");
    const auto maps = extractor.feature_maps(frames);
    auto frame_maps = [&](std::int64_t i) {
        std::vector<torch::Tensor> out;
        for (const auto& m : maps) out.push_back(m[i]);
        return out;
    };
    const auto pairs = lpips_pairs(frames.size(0), max_pairs, seed);
    double total = 0.0;
    for (const auto& [i, j] : pairs) total += extractor.distance(frame_maps(i), frame_maps(j));
    return total / static_cast<double>(pairs.size());
}

double tc_ratio(double tl, double vlpips, double floor) {
    if (!(vlpips >= floor) || vlpips <= 0.0)
        throw DiversityError("vLPIPS " + std::to_string(vlpips) + " is below the diversity floor " +
                             std::to_string(floor) + "; TC is undefined");
    return tl / vlpips;
}

ConsistencyEntry temporal_consistency(const torch::Tensor& frames, FeatureExtractor& extractor,
                                      const MetricProtocol& protocol) {
    protocol.validate();
    ConsistencyEntry e{};
    e.tl = temporal_loss(frames, protocol.intervals);
    e.vlpips = video_lpips(frames, extractor, protocol.max_pairs, protocol.seed);
    e.tc = tc_ratio(e.tl, e.vlpips, protocol.diversity_floor);
    return e;
}

double fid(const torch::Tensor& features_a, const torch::Tensor& features_b) {
    expect_shape(features_a, {-1, -1}, "fid features");
    expect_shape(features_b, {-1, features_a.size(1)}, "fid features");
    if (features_a.size(0) < 2 || features_b.size(0) < 2)
        throw ProtocolError("fid: each feature set needs at least 2 samples");
    const auto d = features_a.size(1);
    const auto reg = torch::eye(d, torch::kFloat64) * 1e-6;
    auto stats = [&](const torch::Tensor& f) {
        auto x = f.to(torch::kFloat64);
        auto mu = x.mean(0);
        auto c = x - mu;
        auto cov = c.t().mm(c) / static_cast<double>(x.size(0) - 1) + reg;
        return std::make_pair(mu, cov);
    };
    auto [mu_a, cov_a] = stats(features_a);
    auto [mu_b, cov_b] = stats(features_b);

    auto [eval_a, evec_a] = torch::linalg_eigh(cov_a);
    auto sqrt_a = evec_a.mm(torch::diag(eval_a.clamp_min(0.0).sqrt())).mm(evec_a.t());
    auto m = sqrt_a.mm(cov_b).mm(sqrt_a);
    m = 0.5 * (m + m.t());
    auto eval_m = torch::linalg_eigvalsh(m);
    const double tr_sqrt = eval_m.clamp_min(0.0).sqrt().sum().item<double>();

    const double mean_term = (mu_a - mu_b).pow(2).sum().item<double>();
    const double value = mean_term + cov_a.trace().item<double>() + cov_b.trace().item<double>() - 2.0 * tr_sqrt;
    return std::max(value, 0.0);
}

nlohmann::json eval_report(const std::vector<torch::Tensor>& videos, const torch::Tensor& real_images,
                           const torch::Tensor& translated_images, FeatureExtractor& extractor,
                           const MetricProtocol& protocol) {
    protocol.validate();
    if (videos.empty()) throw ProtocolError("eval_report: no videos");
    nlohmann::json per_video = nlohmann::json::array();
    nlohmann::json excluded = nlohmann::json::array();
    double tc_sum = 0.0, tl_sum = 0.0, lp_sum = 0.0;
    std::int64_t kept = 0;
    for (std::size_t i = 0; i < videos.size(); ++i) {
        const double tl = temporal_loss(videos[i], protocol.intervals);
        const double lp = video_lpips(videos[i], extractor, protocol.max_pairs, protocol.seed);
        if (!(lp >= protocol.diversity_floor) || lp <= 0.0) {
            excluded.push_back({{"index", i}, {"vlpips", lp}, {"reason", "diversity below floor"}});
            continue;
        }
        const double tc = tl / lp;
        per_video.push_back(tc);
        tc_sum += tc;
        tl_sum += tl;
        lp_sum += lp;
        ++kept;
    }
    if (kept == 0)
        throw DiversityError("eval_report: every video is below the diversity floor " +
                             std::to_string(protocol.diversity_floor) + ", excluded: " + excluded.dump());

    nlohmann::json report;
    report["tc_mean"] = tc_sum / static_cast<double>(kept);
    report["tc_per_video"] = per_video;
    report["tl"] = tl_sum / static_cast<double>(kept);
    report["vlpips"] = lp_sum / static_cast<double>(kept);
    if (real_images.defined() && translated_images.defined() && real_images.size(0) > 0 &&
        translated_images.size(0) > 0) {
        check_unit_range(real_images, "eval_report real images");
        check_unit_range(translated_images, "eval_report translated images");
        report["fid"] = fid(extractor.pooled(translated_images), extractor.pooled(real_images));
    } else {
        report["fid"] = nullptr;
    }
    report["protocol"] = {{"intervals", protocol.intervals},
                          {"max_pairs", protocol.max_pairs},
                          {"diversity_floor", protocol.diversity_floor},
                          {"seed", protocol.seed},
                          {"extractor", extractor.id()},
                          {"n_videos", videos.size()},
                          {"excluded", excluded},
                          {"n_excluded", excluded.size()},
                          {"pairs", "all i<j, uniformly subsampled without replacement"},
                          {"tl_aggregate", "mean over intervals"}};
    return report;
}

}  // namespace nerf_i2i
