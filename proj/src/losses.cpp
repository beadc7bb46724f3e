#include "nerf_i2i/losses.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "nerf_i2i/networks.hpp"

namespace F = torch::nn::functional;

namespace nerf_i2i {

void LossWeights::validate() const {
    for (double w : {r1, path, alignment, hierarchical, relative})
        if (!(w >= 0.0)) throw ConfigError("loss weights must be non-negative");
}

torch::Tensor logistic_v(const torch::Tensor& u) { return -F::softplus(-u); }

torch::Tensor select_class(const torch::Tensor& scores, const torch::Tensor& labels) {
    expect_shape(scores, {-1, -1}, "discriminator scores");
    expect_shape(labels, {scores.size(0)}, "labels");
    check_labels(labels, scores.size(1));
    return scores.gather(1, (labels - 1).unsqueeze(1)).squeeze(1);
}

torch::Tensor r1_penalty(const ScoreFn& disc, const torch::Tensor& real, const torch::Tensor& labels, double lambda) {
    auto x = real.detach().requires_grad_(true);
    auto logits = select_class(disc(x), labels);
    auto grad = torch::autograd::grad({logits.sum()}, {x}, /*grad_outputs=*/{}, /*retain_graph=*/true,
                                      /*create_graph=*/true)[0];
    return lambda * grad.pow(2).flatten(1).sum(1).mean();
}

torch::Tensor generator_adversarial(const torch::Tensor& fake_scores, const torch::Tensor& labels) {
    return -logistic_v(select_class(fake_scores, labels)).mean();
}

torch::Tensor discriminator_adversarial(const torch::Tensor& fake_scores, const torch::Tensor& real_scores,
                                        const torch::Tensor& labels) {
    return -(logistic_v(-select_class(fake_scores, labels)).mean() +
             logistic_v(select_class(real_scores, labels)).mean());
}

AdversarialTerms gan_losses_per_class(const ScoreFn& disc, const torch::Tensor& fake, const torch::Tensor& real,
                                      const torch::Tensor& labels, double lambda) {
    if (lambda < 0.0) throw ConfigError("R1 weight must be non-negative");
    AdversarialTerms t;
    auto fake_l = select_class(disc(fake), labels);
    auto real_l = select_class(disc(real), labels);
    t.v_fake = logistic_v(fake_l).mean();
    t.v_fake_neg = logistic_v(-fake_l).mean();
    t.v_real = logistic_v(real_l).mean();
    t.r1 = r1_penalty(disc, real, labels, lambda);
    t.generator = -t.v_fake;
    t.discriminator = -(t.v_fake_neg + t.v_real) + t.r1;
    return t;
}

AdversarialTerms gan_losses_unconditional(const ScoreFn& disc, const torch::Tensor& fake, const torch::Tensor& real,
                                          double lambda) {
    if (lambda < 0.0) throw ConfigError("R1 weight must be non-negative");
    auto scalar = [&](const torch::Tensor& x) {
        auto s = disc(x);
        expect_shape(s, {x.size(0), 1}, "unconditional discriminator scores");
        return s.squeeze(1);
    };
    AdversarialTerms t;
    auto fake_s = scalar(fake);
    auto real_s = scalar(real);
    t.v_fake = logistic_v(fake_s).mean();
    t.v_fake_neg = logistic_v(-fake_s).mean();
    t.v_real = logistic_v(real_s).mean();
    auto x = real.detach().requires_grad_(true);
    auto grad = torch::autograd::grad({scalar(x).sum()}, {x}, {}, true, true)[0];
    t.r1 = lambda * grad.pow(2).flatten(1).sum(1).mean();
    t.generator = -t.v_fake;
    t.discriminator = -(t.v_fake_neg + t.v_real) + t.r1;
    return t;
}

torch::Tensor loss_alignment(const torch::Tensor& f, const torch::Tensor& f_hat) {
    if (f.sizes() != f_hat.sizes())
        throw ShapeError("loss_alignment: " + shape_str(f) + " vs " + shape_str(f_hat));
    return (f - f_hat).abs().mean();
}

std::vector<torch::Tensor> hierarchy(const std::vector<torch::Tensor>& blocks, const torch::Tensor& image) {
    auto out = blocks;
    out.push_back(image);
    return out;
}

torch::Tensor loss_hierarchical(const std::vector<torch::Tensor>& from_f, const std::vector<torch::Tensor>& from_f_hat,
                                HierarchyRange range) {
    const auto n = static_cast<std::int64_t>(from_f.size());
    if (n == 0 || from_f_hat.size() != from_f.size())
        throw ConfigError("loss_hierarchical: hierarchies have different lengths");
    const auto last = range.last < 0 ? n : range.last;
    if (range.first < 1 || range.first > last || last > n)
        throw ConfigError("loss_hierarchical: range [" + std::to_string(range.first) + ", " + std::to_string(last) +
                          "] outside 1.." + std::to_string(n));
    torch::Tensor total;
    for (auto k = range.first; k <= last; ++k) {
        const auto& a = from_f[static_cast<std::size_t>(k - 1)];
        const auto& b = from_f_hat[static_cast<std::size_t>(k - 1)];
        if (a.sizes() != b.sizes())
            throw ShapeError("loss_hierarchical: level " + std::to_string(k) + " " + shape_str(a) + " vs " +
                             shape_str(b));
        auto term = (a - b).abs().mean();
        total = total.defined() ? total + term : term;
    }
    return total;
}

std::vector<std::int64_t> sample_anchors(std::int64_t height, std::int64_t width, std::int64_t n_anchors,
                                         std::uint64_t seed) {
    if (height < 3 || width < 3)
        throw ConfigError("relative loss needs spatial dims >= 3 for interior anchors");
    if (n_anchors < 1) throw ConfigError("relative loss needs n_anchors >= 1");
    std::vector<std::int64_t> interior;
    interior.reserve(static_cast<std::size_t>((height - 2) * (width - 2)));
    for (std::int64_t i = 1; i + 1 < height; ++i)
        for (std::int64_t j = 1; j + 1 < width; ++j) interior.push_back(i * width + j);
    if (n_anchors < static_cast<std::int64_t>(interior.size())) {
        std::mt19937_64 rng(seed);
        std::shuffle(interior.begin(), interior.end(), rng);
        interior.resize(static_cast<std::size_t>(n_anchors));
        std::sort(interior.begin(), interior.end());
    }
    return interior;
}

torch::Tensor loss_relative(const torch::Tensor& f, const torch::Tensor& f_hat, const std::vector<std::int64_t>& anchors) {
    if (f.sizes() != f_hat.sizes())
        throw ShapeError("loss_relative: " + shape_str(f) + " vs " + shape_str(f_hat));
    expect_shape(f, {-1, -1, -1, -1}, "loss_relative input");
    const auto h = f.size(2);
    const auto w = f.size(3);
    if (h < 3 || w < 3) throw ConfigError("relative loss needs spatial dims >= 3 for interior anchors");
    if (anchors.empty()) throw ConfigError("relative loss: no anchors");

    // d_f - d_f_hat == g^eta - g^{eta,eps} with g = f - f_hat.
    auto g = (f - f_hat).flatten(2);  // [N, C, H*W]
    auto center = torch::tensor(anchors, torch::kLong);
    auto gc = g.index_select(2, center);
    std::vector<torch::Tensor> terms;
    terms.reserve(8);
    for (std::int64_t di = -1; di <= 1; ++di) {
        for (std::int64_t dj = -1; dj <= 1; ++dj) {
            if (di == 0 && dj == 0) continue;
            auto nb = g.index_select(2, center + (di * w + dj));
            terms.push_back((gc - nb).abs());
        }
    }
    return torch::stack(terms).mean();
}

torch::Tensor loss_relative(const torch::Tensor& f, const torch::Tensor& f_hat, std::int64_t n_anchors,
                            std::uint64_t seed) {
    expect_shape(f, {-1, -1, -1, -1}, "loss_relative input");
    return loss_relative(f, f_hat, sample_anchors(f.size(2), f.size(3), n_anchors, seed));
}

AdaptorLoss adaptor_objective(const torch::Tensor& f, const torch::Tensor& f_hat,
                              const std::vector<torch::Tensor>& hierarchy_f,
                              const std::vector<torch::Tensor>& hierarchy_f_hat, const LossWeights& weights,
                              std::int64_t n_anchors, std::uint64_t seed, HierarchyRange range) {
    weights.validate();
    AdaptorLoss out;
    out.alignment = loss_alignment(f, f_hat);
    out.hierarchical = loss_hierarchical(hierarchy_f, hierarchy_f_hat, range);
    out.relative = loss_relative(f, f_hat, n_anchors, seed);
    out.total = weights.alignment * out.alignment + weights.hierarchical * out.hierarchical +
                weights.relative * out.relative;
    return out;
}

}  // namespace nerf_i2i
