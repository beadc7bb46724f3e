#include <cmath>

#include "nerf_i2i/losses.hpp"
#include "nerf_i2i/networks.hpp"
#include "test_util.hpp"

using namespace nerf_i2i;

namespace {

torch::Tensor labels_of(std::vector<std::int64_t> l) { return torch::tensor(l, torch::kLong); }

double brute_relative(const torch::Tensor& f, const torch::Tensor& fh, const std::vector<std::int64_t>& anchors) {
    const auto n = f.size(0), c = f.size(1), w = f.size(3);
    double total = 0.0;
    std::int64_t count = 0;
    for (auto a : anchors) {
        const auto i = a / w, j = a % w;
        for (int di = -1; di <= 1; ++di)
            for (int dj = -1; dj <= 1; ++dj) {
                if (di == 0 && dj == 0) continue;
                for (std::int64_t b = 0; b < n; ++b)
                    for (std::int64_t ch = 0; ch < c; ++ch) {
                        const double df = f[b][ch][i][j].item<double>() - f[b][ch][i + di][j + dj].item<double>();
                        const double dh =
                            fh[b][ch][i][j].item<double>() - fh[b][ch][i + di][j + dj].item<double>();
                        total += std::abs(df - dh);
                        ++count;
                    }
            }
    }
    return total / static_cast<double>(count);
}

}  // namespace

TEST(LogisticV, ValuesAndStability) {
    auto u = torch::tensor({0.0, 50.0, -30.0, -1000.0, 1000.0}, torch::kFloat64);
    auto v = logistic_v(u);
    EXPECT_NEAR(v[0].item<double>(), -std::log(2.0), 1e-15);
    EXPECT_LE(v[1].item<double>(), 0.0);
    EXPECT_GT(v[1].item<double>(), -1e-20);
    EXPECT_NEAR(v[2].item<double>(), -30.0 - std::log1p(std::exp(-30.0)), 1e-12);
    EXPECT_DOUBLE_EQ(v[3].item<double>(), -1000.0);
    EXPECT_TRUE(torch::isfinite(v).all().item<bool>());
}

TEST(SelectClass, OneBasedColumns) {
    auto s = torch::arange(6, torch::kFloat64).view({2, 3});
    auto picked = select_class(s, labels_of({3, 1}));
    EXPECT_DOUBLE_EQ(picked[0].item<double>(), 2.0);
    EXPECT_DOUBLE_EQ(picked[1].item<double>(), 3.0);
    EXPECT_THROW(select_class(s, labels_of({0, 1})), LabelError);
    EXPECT_THROW(select_class(s, labels_of({1, 4})), LabelError);
}

TEST(R1, LinearDiscriminatorClosedForm) {
    torch::manual_seed(3);
    auto a = torch::randn({2, 12}, torch::kFloat64);
    ScoreFn disc = [&](const torch::Tensor& x) { return x.flatten(1).mm(a.t()); };
    auto real = torch::randn({4, 3, 2, 2}, torch::kFloat64);
    auto labels = labels_of({1, 2, 2, 1});
    const double lambda = 0.5;
    auto r1 = r1_penalty(disc, real, labels, lambda).item<double>();
    const double expected = lambda * 0.5 * (a[0].pow(2).sum() + a[1].pow(2).sum()).item<double>();
    EXPECT_NEAR(r1, expected, 1e-12);
}

TEST(PerClassObjective, SingleClassEqualsUnconditional) {
    torch::manual_seed(5);
    Discriminator d(std::vector<std::int64_t>{8, 8, 8}, 16, 1);
    d->to(torch::kFloat64);
    ScoreFn disc = [&](const torch::Tensor& x) { return d->forward(x).scores; };
    auto gen = make_generator(11);
    auto fake = torch::randn({4, 3, 16, 16}, gen, torch::kFloat64);
    auto real = torch::randn({4, 3, 16, 16}, gen, torch::kFloat64);
    auto cond = gan_losses_per_class(disc, fake, real, torch::ones({4}, torch::kLong), 0.5);
    auto uncond = gan_losses_unconditional(disc, fake, real, 0.5);
    EXPECT_NEAR(cond.generator.item<double>(), uncond.generator.item<double>(), 1e-6);
    EXPECT_NEAR(cond.discriminator.item<double>(), uncond.discriminator.item<double>(), 1e-6);
    EXPECT_NEAR(cond.r1.item<double>(), uncond.r1.item<double>(), 1e-6);
}

TEST(PerClassObjective, OtherClassChannelsGetZeroGradient) {
    torch::manual_seed(6);
    Discriminator d(std::vector<std::int64_t>{8, 8, 8}, 16, 3);
    ScoreFn disc = [&](const torch::Tensor& x) { return d->forward(x).scores; };
    auto fake = torch::randn({4, 3, 16, 16});
    auto real = torch::randn({4, 3, 16, 16});
    auto labels = labels_of({2, 2, 2, 2});
    auto terms = gan_losses_per_class(disc, fake, real, labels, 0.5);
    d->zero_grad();
    (terms.discriminator + terms.generator).backward();
    auto gw = d->out->weight.grad();
    auto gb = d->out->bias.grad();
    for (std::int64_t j : {0, 2}) {
        EXPECT_EQ(gw[j].abs().max().item<double>(), 0.0) << "channel " << j;
        EXPECT_EQ(gb[j].item<double>(), 0.0) << "channel " << j;
    }
    EXPECT_GT(gw[1].abs().max().item<double>(), 0.0);

    auto fs = torch::randn({3, 4}, torch::requires_grad());
    auto rs = torch::randn({3, 4}, torch::requires_grad());
    auto lab = labels_of({1, 4, 2});
    (generator_adversarial(fs, lab) + discriminator_adversarial(fs, rs, lab)).backward();
    auto mask = torch::ones({3, 4});
    mask.index_put_({0, 0}, 0.0);
    mask.index_put_({1, 3}, 0.0);
    mask.index_put_({2, 1}, 0.0);
    EXPECT_EQ((fs.grad() * mask).abs().max().item<double>(), 0.0);
    EXPECT_EQ((rs.grad() * mask).abs().max().item<double>(), 0.0);
}

TEST(AdaptorLosses, ZeroWhenFeaturesMatch) {
    auto f = torch::randn({2, 4, 5, 5}, torch::kFloat64);
    auto blocks = std::vector<torch::Tensor>{torch::randn({2, 3, 10, 10}), torch::randn({2, 3, 20, 20})};
    EXPECT_EQ(loss_alignment(f, f.clone()).item<double>(), 0.0);
    EXPECT_EQ(loss_hierarchical(blocks, blocks).item<double>(), 0.0);
    EXPECT_EQ(loss_relative(f, f.clone(), 9, 1).item<double>(), 0.0);
}

TEST(AdaptorLosses, RelativeIgnoresConstantShift) {
    auto f = torch::randn({2, 4, 5, 5}, torch::kFloat64);
    auto fh = torch::randn({2, 4, 5, 5}, torch::kFloat64);
    auto shift = torch::randn({1, 4, 1, 1}, torch::kFloat64);
    auto lr = loss_relative(f, fh, 6, 2).item<double>();
    EXPECT_NEAR(loss_relative(f, fh + shift, 6, 2).item<double>(), lr, 1e-12);
    EXPECT_NE(loss_alignment(f, fh + shift).item<double>(), loss_alignment(f, fh).item<double>());
}

TEST(AdaptorLosses, MatchBruteForce) {
    torch::manual_seed(8);
    auto f = torch::randn({2, 3, 5, 6}, torch::kFloat64);
    auto fh = torch::randn({2, 3, 5, 6}, torch::kFloat64);

    double la = 0.0;
    for (int i = 0; i < f.numel(); ++i) la += std::abs(f.view(-1)[i].item<double>() - fh.view(-1)[i].item<double>());
    EXPECT_NEAR(loss_alignment(f, fh).item<double>(), la / static_cast<double>(f.numel()), 1e-12);

    auto anchors = sample_anchors(5, 6, 7, 42);
    ASSERT_EQ(anchors.size(), 7u);
    for (auto a : anchors) {
        EXPECT_GE(a / 6, 1);
        EXPECT_LE(a / 6, 3);
        EXPECT_GE(a % 6, 1);
        EXPECT_LE(a % 6, 4);
    }
    EXPECT_EQ(sample_anchors(5, 6, 7, 42), anchors);
    EXPECT_NEAR(loss_relative(f, fh, anchors).item<double>(), brute_relative(f, fh, anchors), 1e-12);
    EXPECT_EQ(sample_anchors(5, 6, 100, 0).size(), 12u);

    std::vector<torch::Tensor> a{torch::randn({2, 2, 4, 4}, torch::kFloat64), torch::randn({2, 3, 8, 8}, torch::kFloat64),
                                 torch::randn({2, 3, 8, 8}, torch::kFloat64)};
    std::vector<torch::Tensor> b{torch::randn({2, 2, 4, 4}, torch::kFloat64), torch::randn({2, 3, 8, 8}, torch::kFloat64),
                                 torch::randn({2, 3, 8, 8}, torch::kFloat64)};
    auto level = [&](int k) { return (a[k] - b[k]).abs().mean().item<double>(); };
    EXPECT_NEAR(loss_hierarchical(a, b).item<double>(), level(0) + level(1) + level(2), 1e-12);
    EXPECT_NEAR(loss_hierarchical(a, b, {2, 3}).item<double>(), level(1) + level(2), 1e-12);
    EXPECT_NEAR(loss_hierarchical(a, b, {1, 1}).item<double>(), level(0), 1e-12);
    EXPECT_THROW(loss_hierarchical(a, b, {0, 2}), ConfigError);
    EXPECT_THROW(loss_hierarchical(a, b, {2, 4}), ConfigError);
}

TEST(AdaptorLosses, ObjectiveRecomposes) {
    torch::manual_seed(9);
    auto f = torch::randn({2, 4, 6, 6});
    auto fh = torch::randn({2, 4, 6, 6});
    std::vector<torch::Tensor> hf{torch::randn({2, 3, 12, 12}), torch::randn({2, 3, 24, 24})};
    std::vector<torch::Tensor> hh{torch::randn({2, 3, 12, 12}), torch::randn({2, 3, 24, 24})};
    LossWeights w;
    w.alignment = 0.7;
    w.hierarchical = 1.3;
    w.relative = 2.1;
    auto out = adaptor_objective(f, fh, hf, hh, w, 8, 17);
    const double la = loss_alignment(f, fh).item<double>();
    const double lh = loss_hierarchical(hf, hh).item<double>();
    const double lr = loss_relative(f, fh, 8, 17).item<double>();
    EXPECT_NEAR(out.alignment.item<double>(), la, 1e-6);
    EXPECT_NEAR(out.hierarchical.item<double>(), lh, 1e-6);
    EXPECT_NEAR(out.relative.item<double>(), lr, 1e-6);
    EXPECT_NEAR(out.total.item<double>(), 0.7 * la + 1.3 * lh + 2.1 * lr, 1e-6);

    w.hierarchical = 0.0;
    auto partial = adaptor_objective(f, fh, hf, hh, w, 8, 17);
    EXPECT_NEAR(partial.total.item<double>(), 0.7 * la + 2.1 * lr, 1e-6);
    EXPECT_NEAR(partial.hierarchical.item<double>(), lh, 1e-6);

    w.relative = -1.0;
    EXPECT_THROW(adaptor_objective(f, fh, hf, hh, w, 8, 17), ConfigError);
}

TEST(AdaptorLosses, ShapeErrors) {
    EXPECT_THROW(loss_alignment(torch::zeros({1, 2, 3, 3}), torch::zeros({1, 2, 4, 4})), ShapeError);
    EXPECT_THROW(loss_relative(torch::zeros({1, 2, 2, 2}), torch::zeros({1, 2, 2, 2}), 1, 0), ConfigError);
}
