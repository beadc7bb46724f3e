#pragma once

#include <functional>
#include <vector>

#include "nerf_i2i/common.hpp"

namespace nerf_i2i {

struct LossWeights {
    double r1 = 0.5;      ///< lambda
    double path = 0.2;    ///< beta
    double alignment = 1.0;
    double hierarchical = 1.0;
    double relative = 1.0;

    void validate() const;
};

/// v(u) = -log(1 + exp(-u)) = -softplus(-u), elementwise and overflow-free.
torch::Tensor logistic_v(const torch::Tensor& u);

/// scores[n, labels[n] - 1] for 1-based labels. scores: [N, L]; labels: [N] int64.
torch::Tensor select_class(const torch::Tensor& scores, const torch::Tensor& labels);

/// Discriminator as a function from images to per-class logits [N, L].
using ScoreFn = std::function<torch::Tensor(const torch::Tensor&)>;

/// lambda * mean_n ||d D(I_n)_{l_n} / d I_n||^2, differentiable (double backward).
torch::Tensor r1_penalty(const ScoreFn& disc, const torch::Tensor& real, const torch::Tensor& labels, double lambda);

/// Mean over the batch of the terms of the per-class adversarial objective.
struct AdversarialTerms {
    torch::Tensor v_fake;        ///< mean v(D(fake)_l): the generator maximizes it
    torch::Tensor v_fake_neg;    ///< mean v(-D(fake)_l)
    torch::Tensor v_real;        ///< mean v(D(real)_l)
    torch::Tensor r1;            ///< lambda * mean ||grad||^2 on real images
    torch::Tensor generator;     ///< -v_fake (descended by G)
    torch::Tensor discriminator; ///< -(v_fake_neg + v_real) + r1 (descended by D)
};

/// Loss terms from precomputed logits; only column l of each row enters.
torch::Tensor generator_adversarial(const torch::Tensor& fake_scores, const torch::Tensor& labels);
torch::Tensor discriminator_adversarial(const torch::Tensor& fake_scores, const torch::Tensor& real_scores,
                                        const torch::Tensor& labels);

/// Per-class objective: only the l-th discriminator response enters the loss and R1.
AdversarialTerms gan_losses_per_class(const ScoreFn& disc, const torch::Tensor& fake, const torch::Tensor& real,
                                      const torch::Tensor& labels, double lambda);

/// Single-output objective; scores must be [N, 1].
AdversarialTerms gan_losses_unconditional(const ScoreFn& disc, const torch::Tensor& fake, const torch::Tensor& real,
                                          double lambda);

/// Mean |f - f_hat| over all entries.
torch::Tensor loss_alignment(const torch::Tensor& f, const torch::Tensor& f_hat);

/// 1-based inclusive range into a generator hierarchy (blocks G_1..G_n followed by the image).
struct HierarchyRange {
    std::int64_t first = 1;
    std::int64_t last = -1;  ///< -1: through the end of the list
};

/// Blocks followed by the image, the list consumed by loss_hierarchical.
std::vector<torch::Tensor> hierarchy(const std::vector<torch::Tensor>& blocks, const torch::Tensor& image);

/// sum_{k=m..n} mean |G(f)_k - G(f_hat)_k|.
torch::Tensor loss_hierarchical(const std::vector<torch::Tensor>& from_f, const std::vector<torch::Tensor>& from_f_hat,
                                HierarchyRange range = {});

/// Interior anchor positions (row-major flat index into H x W), seeded, without replacement.
std::vector<std::int64_t> sample_anchors(std::int64_t height, std::int64_t width, std::int64_t n_anchors,
                                         std::uint64_t seed);

/// Mean over anchors eta, 8 neighbours eps (row-major), batch and channels of
/// |(f^eta - f^{eta,eps}) - (f_hat^eta - f_hat^{eta,eps})|. f, f_hat: [N, C, H, W].
torch::Tensor loss_relative(const torch::Tensor& f, const torch::Tensor& f_hat, const std::vector<std::int64_t>& anchors);
torch::Tensor loss_relative(const torch::Tensor& f, const torch::Tensor& f_hat, std::int64_t n_anchors,
                            std::uint64_t seed);

struct AdaptorLoss {
    torch::Tensor total;
    torch::Tensor alignment;
    torch::Tensor hierarchical;
    torch::Tensor relative;
};

/// Weighted L_A + L_H + L_R. Terms with zero weight are still reported.
AdaptorLoss adaptor_objective(const torch::Tensor& f, const torch::Tensor& f_hat,
                              const std::vector<torch::Tensor>& hierarchy_f,
                              const std::vector<torch::Tensor>& hierarchy_f_hat, const LossWeights& weights,
                              std::int64_t n_anchors, std::uint64_t seed, HierarchyRange range = {});

}  // namespace nerf_i2i
