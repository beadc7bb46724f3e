// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance --cli <path to nerf-i2i> --workdir <scratch dir> [--only 1,4,...]
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "nerf_i2i/i2i.hpp"
#include "nerf_i2i/metrics.hpp"
#include "nerf_i2i/training.hpp"
#include "nerf_i2i/transplant.hpp"

using namespace nerf_i2i;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << "[failed: " << what << "] ";
        }
    }
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

double max_abs_diff(const torch::Tensor& a, const torch::Tensor& b) {
    return (a.to(torch::kFloat64) - b.to(torch::kFloat64)).abs().max().item<double>();
}

// ---------------------------------------------------------------------------
// Settings
// ---------------------------------------------------------------------------

struct Budget {
    std::int64_t n_per_class = 200;
    std::int64_t pretrain_steps = 600;
    std::int64_t finetune_steps = 300;
    std::int64_t adaptor_steps = 2000;
    std::int64_t n_orbits = 20;
    std::int64_t orbit_frames = 16;
    std::int64_t fid_samples = 256;
    std::uint64_t seed = 1;
};

// ---------------------------------------------------------------------------
// 1. Rendering oracle
// ---------------------------------------------------------------------------

Outcome criterion_rendering() {
    Outcome o;
    const auto t0 = Clock::now();
    const double sigma0 = 0.8;
    const std::vector<double> c0{0.3, -0.7, 1.1};
    FieldFn field = [&](const torch::Tensor& x, const torch::Tensor&) {
        auto opts = x.options();
        auto c = torch::tensor(c0, opts).view({1, 1, -1}).expand({x.size(0), x.size(1), -1});
        return FieldSample{c, torch::full({x.size(0), x.size(1)}, sigma0, opts)};
    };
    RenderConfig cfg;
    cfg.n_samples = 256;
    cfg.height = cfg.width = 8;
    auto out = render({look_at({0.0, 0.0, 3.0}, {0.0, 0.0, 0.0}, 0.6)}, field, cfg);
    const double opacity = 1.0 - std::exp(-sigma0 * (cfg.t_far - cfg.t_near));
    double err = 0.0;
    for (int c = 0; c < 3; ++c)
        err = std::max(err, (out.feature_map[0][c] - c0[c] * opacity).abs().max().item<double>());
    const double secs = seconds_since(t0);
    o.require(err <= 1e-3, "max error " + fmt(err) + " > 1e-3");
    o.require(secs < 10.0, "runtime " + fmt(secs) + " s");
    o.detail << "max |f - c0(1-exp(-sigma0 dt))| = " << fmt(err) << " at 256 samples, " << fmt(secs) << " s";
    return o;
}

// ---------------------------------------------------------------------------
// 2. Gradient suite
// ---------------------------------------------------------------------------

using ScalarFn = std::function<torch::Tensor(const torch::Tensor&)>;

double grad_rel_error(const ScalarFn& fn, const torch::Tensor& at, double eps = 1e-6) {
    auto x = at.detach().clone().to(torch::kFloat64).requires_grad_(true);
    auto analytic = torch::autograd::grad({fn(x)}, {x})[0].detach();
    auto base = at.detach().clone().to(torch::kFloat64);
    auto numeric = torch::zeros_like(analytic);
    for (std::int64_t i = 0; i < base.numel(); ++i) {
        auto xp = base.clone();
        auto xm = base.clone();
        xp.view(-1)[i] += eps;
        xm.view(-1)[i] -= eps;
        numeric.view(-1)[i] = (fn(xp).item<double>() - fn(xm).item<double>()) / (2.0 * eps);
    }
    return (analytic - numeric).norm().item<double>() / std::max(numeric.norm().item<double>(), 1e-12);
}

Outcome criterion_gradients() {
    Outcome o;
    const auto t0 = Clock::now();
    torch::manual_seed(2);
    std::vector<std::pair<std::string, double>> errors;

    {
        FieldConfig fc;
        fc.style_dim = 3;
        fc.hidden = 8;
        fc.feature_channels = 2;
        fc.pos_freqs = 2;
        fc.dir_freqs = 1;
        FeatureField field(fc);
        field->to(torch::kFloat64);
        RenderConfig cfg;
        cfg.n_samples = 8;
        cfg.height = cfg.width = 3;
        auto pose = look_at({0.3, 0.2, 3.0}, {0.0, 0.0, 0.0}, 0.8);
        auto proj = torch::randn({1, 2, 3, 3}, torch::kFloat64);
        errors.emplace_back("render_feature_map", grad_rel_error([&](const torch::Tensor& w) {
            return (render_feature_map(field, {pose}, w, cfg) * proj).sum();
        }, torch::randn({1, 3}, torch::kFloat64)));
    }
    errors.emplace_back("logistic_v", grad_rel_error([](const torch::Tensor& u) { return logistic_v(u).sum(); },
                                                     torch::randn({3, 3}, torch::kFloat64) * 3.0));
    {
        auto real = torch::randn({2, 3, 1, 3}, torch::kFloat64);
        auto labels = torch::tensor({1, 2}, torch::kLong);
        errors.emplace_back("R1 linear D", grad_rel_error([&](const torch::Tensor& a) {
            ScoreFn disc = [&](const torch::Tensor& x) { return x.flatten(1).mm(a.t()); };
            return r1_penalty(disc, real, labels, 0.5);
        }, torch::randn({2, 9}, torch::kFloat64)));
    }
    auto f = torch::randn({1, 2, 3, 3}, torch::kFloat64);
    errors.emplace_back("L_A", grad_rel_error([&](const torch::Tensor& fh) { return loss_alignment(f, fh); },
                                              torch::randn({1, 2, 3, 3}, torch::kFloat64)));
    {
        std::vector<torch::Tensor> target{torch::randn({1, 2, 3, 3}, torch::kFloat64),
                                          torch::randn({1, 3, 3, 3}, torch::kFloat64)};
        auto mix = torch::randn({3, 2}, torch::kFloat64);
        errors.emplace_back("L_H", grad_rel_error([&](const torch::Tensor& x) {
            std::vector<torch::Tensor> levels{x, torch::tanh(torch::einsum("oc,nchw->nohw", {mix, x}))};
            return loss_hierarchical(target, levels);
        }, torch::randn({1, 2, 3, 3}, torch::kFloat64)));
    }
    errors.emplace_back("L_R", grad_rel_error([&](const torch::Tensor& fh) {
        return loss_relative(f, fh, std::vector<std::int64_t>{4});
    }, torch::randn({1, 2, 3, 3}, torch::kFloat64)));
    {
        auto image = torch::randn({1, 3, 6, 6}, torch::kFloat64);
        auto proj = torch::randn({3, 2}, torch::kFloat64);
        auto projection = [&](const torch::Tensor& x) { return torch::einsum("oc,nchw->nohw", {proj, x}); };
        errors.emplace_back("L_path", grad_rel_error([&](const torch::Tensor& fm) {
            return nerf_path_loss(fm, image, projection, 9, 0);
        }, torch::randn({1, 2, 3, 3}, torch::kFloat64)));
    }

    double worst = 0.0;
    for (const auto& [name, e] : errors) {
        o.require(e <= 1e-4, name + " rel err " + fmt(e));
        worst = std::max(worst, e);
    }
    const double secs = seconds_since(t0);
    o.require(secs < 60.0, "runtime " + fmt(secs) + " s");
    o.detail << errors.size() << " checks, worst rel err " << fmt(worst) << ", " << fmt(secs) << " s";
    return o;
}

// ---------------------------------------------------------------------------
// 3. Transplant exactness
// ---------------------------------------------------------------------------

Outcome criterion_transplant(std::uint64_t seed) {
    Outcome o;
    ArchConfig arch;
    arch.num_classes = 1;
    auto uncond_ckpt = init_unconditional(arch, seed);
    auto cond_ckpt = transplant_conditional(uncond_ckpt, 2, seed);
    auto uncond = load_model(uncond_ckpt);
    auto cond = load_model(cond_ckpt);
    torch::NoGradGuard guard;

    auto gen = make_generator(sub_seed(seed, "c3"));
    auto z = uncond->sample_z(4, gen);
    auto w1u = uncond->map_w1(z);
    auto w1c = cond->map_w1(z);
    auto poses = sample_cameras(CameraPrior{}, 4, seed);
    RenderConfig rc;
    rc.n_samples = 16;
    rc.height = rc.width = arch.feature_resolution;
    auto fu = render_feature_map(uncond->field, poses, w1u, rc);
    auto fc = render_feature_map(cond->field, poses, w1c, rc);
    const bool a_ok = torch::equal(w1u, w1c) && torch::equal(fu, fc);
    o.require(a_ok, "(a) M1/F forwards differ");

    auto gu = uncond->generator->forward(fu, w1u, w1u).image;
    auto gc = cond->generator->forward(fc, w1c, w1c).image;
    o.require(torch::equal(gu, gc), "(b) G(f, w1, w1) differs");

    auto plan = TransplantPlan::from_json(cond_ckpt.manifest.at("transplant"));
    std::set<std::string> fresh(plan.fresh.begin(), plan.fresh.end());
    const std::set<std::string> expected{"mapping2.layers.0.weight", "mapping2.layers.0.bias", "disc.out.weight",
                                         "disc.out.bias", "embedding.weight"};
    o.require(fresh == expected, "(c) fresh set differs");
    bool copies_ok = plan.copies.size() + plan.fresh.size() == cond_ckpt.tensors.size();
    for (const auto& [from, to] : plan.copies)
        copies_ok = copies_ok && torch::equal(uncond_ckpt.tensors.at(from), cond_ckpt.tensors.at(to));
    o.require(copies_ok, "copied tensors differ from source");

    o.detail << "(a) " << (a_ok ? "bitwise" : "differs") << ", (b) " << (torch::equal(gu, gc) ? "bitwise" : "differs")
             << ", (c) fresh = {";
    for (const auto& n : fresh) o.detail << n << (n == *fresh.rbegin() ? "" : ", ");
    o.detail << "}";
    return o;
}

// ---------------------------------------------------------------------------
// 4. Per-class objective degeneracy and isolation
// ---------------------------------------------------------------------------

Outcome criterion_per_class(std::uint64_t seed) {
    Outcome o;
    ArchConfig arch;
    torch::manual_seed(sub_seed(seed, "c4"));
    Discriminator d1(arch.discriminator_channels, arch.image_resolution(), 1);
    auto gen = make_generator(sub_seed(seed, "c4-batch"));
    auto fake = torch::rand({4, 3, 64, 64}, gen) * 2.0 - 1.0;
    auto real = torch::rand({4, 3, 64, 64}, gen) * 2.0 - 1.0;
    ScoreFn disc1 = [&](const torch::Tensor& x) { return d1->forward(x).scores; };
    auto cond = gan_losses_per_class(disc1, fake, real, torch::ones({4}, torch::kLong), 0.5);
    auto uncond = gan_losses_unconditional(disc1, fake, real, 0.5);
    const double dg = std::abs(cond.generator.item<double>() - uncond.generator.item<double>());
    const double dd = std::abs(cond.discriminator.item<double>() - uncond.discriminator.item<double>());
    o.require(dg <= 1e-6 && dd <= 1e-6, "L=1 losses differ");

    Discriminator d3(arch.discriminator_channels, arch.image_resolution(), 3);
    ScoreFn disc3 = [&](const torch::Tensor& x) { return d3->forward(x).scores; };
    auto labels = torch::full({4}, 2, torch::kLong);
    auto terms = gan_losses_per_class(disc3, fake, real, labels, 0.5);
    d3->zero_grad();
    (terms.discriminator + terms.generator).backward();
    double other = 0.0;
    for (std::int64_t j : {0, 2})
        other = std::max({other, d3->out->weight.grad()[j].abs().max().item<double>(),
                          d3->out->bias.grad()[j].abs().item<double>()});
    const double own = d3->out->weight.grad()[1].abs().max().item<double>();
    o.require(other == 0.0, "gradient on channels j != l is " + fmt(other));
    o.require(own > 0.0, "no gradient on channel l");
    o.detail << "|dL_G| = " << fmt(dg) << ", |dL_D| = " << fmt(dd) << ", max |grad| on j != l = " << other;
    return o;
}

// ---------------------------------------------------------------------------
// 5. Adaptor loss identities
// ---------------------------------------------------------------------------

Outcome criterion_loss_identities(std::uint64_t seed) {
    Outcome o;
    auto gen = make_generator(sub_seed(seed, "c5"));
    auto f = torch::randn({4, 64, 16, 16}, gen);
    auto fh = torch::randn({4, 64, 16, 16}, gen);
    std::vector<torch::Tensor> hf{torch::randn({4, 32, 32, 32}, gen), torch::randn({4, 16, 64, 64}, gen),
                                  torch::randn({4, 3, 64, 64}, gen)};
    std::vector<torch::Tensor> hh{torch::randn({4, 32, 32, 32}, gen), torch::randn({4, 16, 64, 64}, gen),
                                  torch::randn({4, 3, 64, 64}, gen)};

    const double la0 = loss_alignment(f, f.clone()).item<double>();
    const double lh0 = loss_hierarchical(hf, hf).item<double>();
    const double lr0 = loss_relative(f, f.clone(), 16, seed).item<double>();
    o.require(la0 == 0.0 && lh0 == 0.0 && lr0 == 0.0, "losses not zero at f_hat = f");

    auto shift = torch::randn({1, 64, 1, 1}, gen);
    const double lr = loss_relative(f, fh, 16, seed).item<double>();
    const double lr_shift = loss_relative(f, fh + shift, 16, seed).item<double>();
    const double la = loss_alignment(f, fh).item<double>();
    const double la_shift = loss_alignment(f, fh + shift).item<double>();
    o.require(std::abs(lr - lr_shift) <= 1e-5 * std::max(1.0, lr), "L_R changed under a constant shift");
    o.require(la != la_shift, "L_A unchanged under a constant shift");

    LossWeights w;
    w.alignment = 1.0;
    w.hierarchical = 0.5;
    w.relative = 2.0;
    auto obj = adaptor_objective(f, fh, hf, hh, w, 16, seed);
    const double lh = loss_hierarchical(hf, hh).item<double>();
    const double recomposed = w.alignment * la + w.hierarchical * lh + w.relative * lr;
    const double err = std::abs(obj.total.item<double>() - recomposed);
    o.require(err <= 1e-6 * std::max(1.0, std::abs(recomposed)), "recomposition error " + fmt(err));
    o.detail << "zeros (" << la0 << ", " << lh0 << ", " << lr0 << "), |dL_R| under shift = " << fmt(std::abs(lr - lr_shift))
             << ", L_A " << fmt(la) << " -> " << fmt(la_shift) << ", recomposition err = " << fmt(err);
    return o;
}

// ---------------------------------------------------------------------------
// 6. Metric oracles
// ---------------------------------------------------------------------------

Outcome criterion_metrics(std::uint64_t seed) {
    Outcome o;
    auto v = torch::zeros({6, 3, 2, 2}, torch::kFloat64);
    for (int t = 0; t < 6; ++t)
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    v[t][c][i][j] = std::fmod(0.13 * t * t + 0.07 * c + 0.21 * i + 0.05 * j * t, 1.0);
    double expected = 0.0;
    for (int d : {1, 2, 4}) {
        double per = 0.0;
        for (int t = 0; t + d < 6; ++t) {
            double ss = 0.0;
            for (int c = 0; c < 3; ++c)
                for (int i = 0; i < 2; ++i)
                    for (int j = 0; j < 2; ++j) {
                        const double diff = v[t + d][c][i][j].item<double>() - v[t][c][i][j].item<double>();
                        ss += diff * diff;
                    }
            per += std::sqrt(ss / 12.0);
        }
        expected += per / (6 - d) / 3.0;
    }
    const double tl_err = std::abs(temporal_loss(v) - expected);
    o.require(tl_err <= 1e-10, "TL error " + fmt(tl_err));

    RandomConvExtractor ex(seed);
    auto gen = make_generator(sub_seed(seed, "c6"));
    auto frames = torch::rand({6, 3, 32, 32}, gen);
    auto maps = ex.feature_maps(frames);
    double sum = 0.0;
    int n = 0;
    for (int i = 0; i < 6; ++i)
        for (int j = i + 1; j < 6; ++j, ++n) {
            std::vector<torch::Tensor> a, b;
            for (const auto& m : maps) {
                a.push_back(m[i]);
                b.push_back(m[j]);
            }
            sum += ex.distance(a, b);
        }
    const bool lp_exact = video_lpips(frames, ex, 1000, 0) == sum / n;
    o.require(lp_exact, "vLPIPS differs from the all-pairs mean");

    auto a = torch::randn({2000, 8}, gen, torch::kFloat64);
    const double fid_aa = fid(a, a);
    o.require(fid_aa <= 1e-6, "FID(A,A) = " + fmt(fid_aa));
    auto x = torch::randn({100000, 4}, gen, torch::kFloat64);
    auto y = torch::randn({100000, 4}, gen, torch::kFloat64) * 2.0 + torch::tensor({1.0, 1.0, 0.0, 0.0}, torch::kFloat64);
    const double fid_xy = fid(x, y);
    o.require(std::abs(fid_xy - 6.0) <= 0.05 * 6.0, "two-Gaussian FID " + fmt(fid_xy) + " vs 6");

    const double tc = tc_ratio(0.2, 0.1);
    o.require(std::abs(tc - 2.0) <= 1e-12, "TC(0.2, 0.1) = " + fmt(tc));

    bool floor_error = false;
    try {
        temporal_consistency(torch::full({6, 3, 32, 32}, 0.5), ex);
    } catch (const DiversityError&) {
        floor_error = true;
    }
    o.require(floor_error, "constant video did not raise the diversity-floor error");
    o.detail << "TL err " << fmt(tl_err) << ", vLPIPS exhaustive " << (lp_exact ? "exact" : "differs")
             << ", FID(A,A) " << fmt(fid_aa) << ", two-Gaussian FID " << fmt(fid_xy) << " (closed form 6), TC "
             << tc << ", constant video " << (floor_error ? "rejected" : "accepted");
    return o;
}

// ---------------------------------------------------------------------------
// 7-9. Desk-scale pipeline
// ---------------------------------------------------------------------------

struct Desk {
    Budget budget;
    ArchConfig arch;
    SyntheticDataset data;
    Checkpoint transplanted, scratch;
    std::vector<VideoSequence> orbits;
    std::vector<torch::Tensor> orbit_styles;
    std::vector<double> pipeline_seconds;
};

GanTrainConfig desk_gan(std::int64_t steps, std::uint64_t seed) {
    GanTrainConfig cfg;
    cfg.steps = steps;
    cfg.render.n_samples = 32;
    cfg.render.stratified = true;
    cfg.seed = seed;
    return cfg;
}

void log_progress(const std::string& what, std::int64_t step, std::int64_t total, Clock::time_point t0) {
    if ((step + 1) % 100 == 0 || step + 1 == total)
        std::cerr << "  " << what << " " << step + 1 << "/" << total << " (" << fmt(seconds_since(t0)) << " s)\n";
}

Desk build_desk(const Budget& b) {
    Desk d;
    d.budget = b;
    const auto t0 = Clock::now();
    d.data = render_synthetic_dataset(default_scene_specs(), b.n_per_class, d.arch.image_resolution(), CameraPrior{},
                                      sub_seed(b.seed, "data"));
    auto train_view = d.data.training_view();

    auto pre = pretrain_unconditional(train_view, d.arch, desk_gan(b.pretrain_steps, b.seed),
                                      [&](const GanStepLog& l) { log_progress("pretrain", l.step, b.pretrain_steps, t0); });
    auto ft_cfg = desk_gan(b.finetune_steps, sub_seed(b.seed, "finetune"));
    d.transplanted = train_conditional(transplant_conditional(pre.checkpoint, d.arch.num_classes, b.seed), train_view,
                                       ft_cfg, [&](const GanStepLog& l) {
                                           log_progress("finetune (transplant)", l.step, b.finetune_steps, t0);
                                       }).checkpoint;
    d.scratch = train_conditional(init_conditional(d.arch, d.arch.num_classes, b.seed), train_view, ft_cfg,
                                  [&](const GanStepLog& l) { log_progress("finetune (scratch)", l.step, b.finetune_steps, t0); })
                    .checkpoint;

    // Source orbits: scenes of class 1 swept in yaw.
    std::mt19937_64 rng(sub_seed(b.seed, "orbit-scenes"));
    const auto spec = default_scene_specs().front();
    auto zgen = make_generator(sub_seed(b.seed, "orbit-styles"));
    for (std::int64_t i = 0; i < b.n_orbits; ++i) {
        auto scene = sample_scene(spec, rng);
        auto video = render_orbit_video(scene, b.orbit_frames, -0.6, 0.6, 0.0, CameraPrior{}, d.arch.image_resolution());
        for (auto& f : video.frames) f = quantize_image(f);
        d.orbits.push_back(std::move(video));
        d.orbit_styles.push_back(torch::randn({d.arch.z_dim}, zgen));
    }
    d.pipeline_seconds.push_back(seconds_since(t0));
    return d;
}

// FID between class-balanced generated images and the dataset, on pooled random-conv features.
double fid_proxy(const Checkpoint& ckpt, const Desk& d) {
    auto model = load_model(ckpt);
    model->eval();
    torch::NoGradGuard guard;
    const auto n = d.budget.fid_samples;
    auto gen = make_generator(sub_seed(d.budget.seed, "fid-latents"));
    auto poses = sample_cameras(CameraPrior{}, n, sub_seed(d.budget.seed, "fid-cameras"));
    RenderConfig rc;
    rc.n_samples = 32;
    rc.height = rc.width = d.arch.feature_resolution;
    std::vector<torch::Tensor> fake;
    for (std::int64_t s = 0; s < n; s += 32) {
        const auto m = std::min<std::int64_t>(32, n - s);
        auto z = model->sample_z(m, gen);
        auto labels = torch::arange(s, s + m, torch::kLong) % d.arch.num_classes + 1;
        std::vector<CameraPose> batch_poses(poses.begin() + s, poses.begin() + s + m);
        fake.push_back(to_unit_range(model->generate(z, labels, batch_poses, rc).synthesis.image));
    }
    auto real = to_unit_range(torch::stack(d.data.images));
    RandomConvExtractor ex(sub_seed(d.budget.seed, "extractor"));
    return fid(ex.pooled(torch::cat(fake, 0)), ex.pooled(real));
}

struct AdaptorRun {
    std::string name;
    AdaptorTrainResult result;
    I2IBundle bundle{nullptr};
    double seconds = 0.0;
};

AdaptorRun run_adaptor(const Desk& d, const std::string& name, const std::string& kind, double wh, double wr) {
    AdaptorRun run;
    run.name = name;
    const auto t0 = Clock::now();
    AdaptorConfig acfg;
    acfg.kind = kind;
    run.bundle = load_bundle(assemble_i2i(d.transplanted, acfg, d.budget.seed));
    AdaptorTrainConfig cfg;
    cfg.steps = d.budget.adaptor_steps;
    cfg.render.n_samples = 32;
    cfg.render.stratified = true;
    cfg.weights.alignment = 1.0;
    cfg.weights.hierarchical = wh;
    cfg.weights.relative = wr;
    cfg.seed = sub_seed(d.budget.seed, "adaptor");
    run.result = train_adaptor(run.bundle, cfg, [&](const AdaptorStepLog& l) {
        log_progress("adaptor " + name, l.step, cfg.steps, t0);
    });
    run.seconds = seconds_since(t0);
    return run;
}

std::vector<double> orbit_tc(I2IBundle& bundle, const Desk& d, bool independent_styles) {
    MetricProtocol protocol;
    protocol.seed = sub_seed(d.budget.seed, "metrics");
    RandomConvExtractor ex(sub_seed(d.budget.seed, "extractor"));
    std::vector<double> out;
    for (std::size_t i = 0; i < d.orbits.size(); ++i) {
        VideoSequence video = independent_styles
                                  ? translate_video_independent_styles(bundle, d.orbits[i], 2, d.budget.seed + i)
                                  : translate_video(bundle, d.orbits[i], 2, d.orbit_styles[i]).video;
        try {
            out.push_back(temporal_consistency(to_unit_range(quantize_image(video.stacked())), ex, protocol).tc);
        } catch (const DiversityError&) {
            // Excluded, as in the evaluation report.
        }
    }
    if (out.empty()) throw DiversityError("every translated orbit is below the diversity floor");
    return out;
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

Outcome criterion_adaptor_contract(AdaptorRun& full, std::int64_t datasets_before,
                                   std::uint64_t frozen_before) {
    Outcome o;
    const auto frozen_after = tensor_checksum(full.bundle->frozen_tensors());
    o.require(frozen_after == frozen_before, "non-adaptor checksum changed");
    const auto datasets_after = ImageDataset::constructions();
    o.require(datasets_after == datasets_before, "a dataset was constructed during adaptor training");

    const auto& log = full.result.log;
    const std::size_t window = 50;
    o.require(log.size() >= window, "fewer steps than the averaging window");
    if (log.size() >= window) {
        double ma0 = 0.0;
        for (std::size_t i = 0; i < window; ++i) ma0 += log[i].alignment;
        ma0 /= window;
        double ma = ma0, best = ma0;
        std::int64_t reached = -1;
        for (std::size_t i = window; i < log.size(); ++i) {
            ma += (log[i].alignment - log[i - window].alignment) / window;
            best = std::min(best, ma);
            if (reached < 0 && ma <= 0.5 * ma0) reached = static_cast<std::int64_t>(i);
        }
        o.require(reached >= 0, "L_A moving average only fell to " + fmt(best / ma0) + " of its start");
        o.detail << "checksum " << (frozen_after == frozen_before ? "unchanged" : "CHANGED") << ", datasets constructed "
                 << datasets_after - datasets_before << ", L_A MA" << window << " " << fmt(ma0) << " -> min " << fmt(best)
                 << " (" << fmt(100.0 * (1.0 - best / ma0)) << "% drop";
        if (reached >= 0) o.detail << ", 50% reached at step " << reached;
        o.detail << ") over " << log.size() << " steps";
    }
    const double budget_s = 2.0 * 3600.0;
    o.require(full.seconds < budget_s, "runtime " + fmt(full.seconds) + " s");
    o.detail << ", " << fmt(full.seconds) << " s";
    return o;
}

// ---------------------------------------------------------------------------
// 10. CLI end-to-end smoke
// ---------------------------------------------------------------------------

Outcome criterion_cli(const std::string& cli, const fs::path& workdir) {
    Outcome o;
    const std::vector<std::string> overrides{"seed=7",          "n_per_class=8",     "steps=10",
                                             "n_frames=4",      "intervals=[1,2]",   "diversity_floor=1e-6"};
    fs::create_directories(workdir);
    std::vector<double> times;
    for (const auto* run : {"run_a", "run_b"}) {
        const auto out = workdir / run;
        fs::remove_all(out);
        const auto t0 = Clock::now();
        for (const auto& stage : {"synth-data", "pretrain", "finetune", "train-adaptor", "translate", "eval"}) {
            std::string cmd = "\"" + cli + "\" " + stage + " --out \"" + out.string() + "\"";
            for (const auto& ov : overrides) cmd += " --override " + ov;
            cmd += " > \"" + (workdir / (std::string(run) + "_" + stage + ".log")).string() + "\" 2>&1";
            const int rc = std::system(cmd.c_str());
            if (rc != 0) {
                o.require(false, std::string(run) + " stage " + stage + " exited with " + std::to_string(rc));
                return o;
            }
        }
        times.push_back(seconds_since(t0));
    }
    const auto a = workdir / "run_a";
    const auto b = workdir / "run_b";
    bool artifacts = fs::exists(a / "eval" / "report.json") && fs::exists(a / "train-adaptor" / "checkpoint" / "manifest.json");
    for (const auto& stage : {"synth-data", "pretrain", "finetune", "train-adaptor", "translate", "eval"})
        artifacts = artifacts && fs::exists(a / stage / "config.json");
    o.require(artifacts, "missing artifacts");
    const bool same = directories_identical(a, b);
    o.require(same, "rerun is not byte-identical");
    o.require(times[0] < 300.0, "runtime " + fmt(times[0]) + " s");
    o.detail << "6 stages in " << fmt(times[0]) << " s (rerun " << fmt(times[1]) << " s), rerun "
             << (same ? "byte-identical" : "differs");
    return o;
}

// ---------------------------------------------------------------------------
// 11. Interpolation endpoints
// ---------------------------------------------------------------------------

Outcome criterion_interpolation(std::uint64_t seed, I2IBundle* trained) {
    Outcome o;
    I2IBundle bundle{nullptr};
    if (trained) {
        bundle = *trained;
    } else {
        ArchConfig arch;
        AdaptorConfig acfg;
        bundle = load_bundle(assemble_i2i(init_conditional(arch, arch.num_classes, seed), acfg, seed));
    }
    auto images = render_synthetic_dataset(default_scene_specs(), 2, bundle->arch().image_resolution(), CameraPrior{},
                                           sub_seed(seed, "c11"));
    auto gen = make_generator(sub_seed(seed, "c11-z"));
    int exact = 0, total = 0;
    for (const auto& img : images.images) {
        auto z = torch::randn({bundle->arch().z_dim}, gen);
        for (auto [label, alpha] : {std::pair<std::int64_t, double>{1, 0.0}, {2, 1.0}}) {
            TranslationRequest req;
            req.image = img;
            req.target_class = label;
            req.z = z;
            auto direct = translate_image(bundle, req);
            auto interp = interpolate_classes(bundle, img, 1, 2, alpha, z);
            exact += torch::equal(direct, interp) ? 1 : 0;
            ++total;
        }
    }
    o.require(exact == total, std::to_string(total - exact) + " endpoint mismatches");
    o.detail << exact << "/" << total << " endpoints bitwise equal to direct translation"
             << (trained ? " (trained bundle)" : " (untrained bundle)");
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::string cli_path;
    std::string workdir = "acceptance_work";
    std::vector<int> only;
    Budget budget;
    app.add_option("--cli", cli_path, "path to the nerf-i2i executable")->required();
    app.add_option("--workdir", workdir, "scratch directory");
    app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',');
    app.add_option("--pretrain-steps", budget.pretrain_steps);
    app.add_option("--finetune-steps", budget.finetune_steps);
    app.add_option("--adaptor-steps", budget.adaptor_steps);
    app.add_option("--n-per-class", budget.n_per_class);
    app.add_option("--seed", budget.seed);
    CLI11_PARSE(app, argc, argv);

    torch::set_num_threads(std::max<int>(1, torch::get_num_threads()));
    fs::create_directories(workdir);
    std::set<int> selected(only.begin(), only.end());
    auto want = [&](int k) { return selected.empty() || selected.count(k) > 0; };

    int failures = 0;
    std::set<int> reported;
    auto report = [&](int k, const std::string& title, const Outcome& o) {
        reported.insert(k);
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << k << " (" << title << "): " << o.detail.str()
                  << std::endl;
        if (!o.pass) ++failures;
    };
    auto guarded = [&](int k, const std::string& title, const std::function<Outcome()>& fn) {
        if (!want(k)) return;
        try {
            report(k, title, fn());
        } catch (const std::exception& e) {
            Outcome o;
            o.pass = false;
            o.detail << "exception: " << e.what();
            report(k, title, o);
        }
    };

    guarded(1, "rendering oracle", criterion_rendering);
    guarded(2, "gradient suite", criterion_gradients);
    guarded(3, "transplant exactness", [&] { return criterion_transplant(budget.seed); });
    guarded(4, "per-class degeneracy and isolation", [&] { return criterion_per_class(budget.seed); });
    guarded(5, "loss identities", [&] { return criterion_loss_identities(budget.seed); });
    guarded(6, "metric oracles", [&] { return criterion_metrics(budget.seed); });

    std::optional<AdaptorRun> full;
    if (want(7) || want(8) || want(9)) {
        try {
            const auto t_all = Clock::now();
            auto desk = build_desk(budget);
            std::cerr << "  desk models trained in " << fmt(desk.pipeline_seconds.front()) << " s\n";

            const auto datasets_before = ImageDataset::constructions();
            AdaptorConfig acfg;
            auto probe = load_bundle(assemble_i2i(desk.transplanted, acfg, budget.seed));
            const auto frozen_before = tensor_checksum(probe->frozen_tensors());
            full = run_adaptor(desk, "unet+LA+LH+LR", "unet", 1.0, 1.0);
            guarded(7, "data-free adaptor training contract",
                    [&] { return criterion_adaptor_contract(*full, datasets_before, frozen_before); });

            std::vector<double> tc_full = orbit_tc(full->bundle, desk, false);
            if (want(8)) {
                guarded(8, "ablation ordering", [&] {
                    Outcome o;
                    std::vector<std::pair<std::string, double>> rows;
                    for (auto [name, kind, wh] : {std::tuple<const char*, const char*, double>{"plain+LA", "plain", 0.0},
                                                  {"unet+LA", "unet", 0.0},
                                                  {"unet+LA+LH", "unet", 1.0}}) {
                        auto run = run_adaptor(desk, name, kind, wh, 0.0);
                        rows.emplace_back(name, mean(orbit_tc(run.bundle, desk, false)));
                    }
                    rows.emplace_back(full->name, mean(tc_full));
                    for (std::size_t i = 0; i < rows.size(); ++i) {
                        o.detail << rows[i].first << " " << fmt(rows[i].second) << (i + 1 < rows.size() ? " > " : "");
                        if (i > 0)
                            o.require(rows[i].second < rows[i - 1].second,
                                      rows[i].first + " not below " + rows[i - 1].first);
                    }
                    const double secs = seconds_since(t_all);
                    o.detail << " (mean TC over " << desk.orbits.size() << " orbits, " << fmt(secs) << " s end-to-end)";
                    return o;
                });
            }
            guarded(9, "transplant vs scratch and 3D vs per-frame styles", [&] {
                Outcome o;
                const double fid_t = fid_proxy(desk.transplanted, desk);
                const double fid_s = fid_proxy(desk.scratch, desk);
                o.require(fid_t < fid_s, "(a) transplant FID-proxy not below scratch");
                const double tc3d = mean(tc_full);
                const double tc2d = mean(orbit_tc(full->bundle, desk, true));
                o.require(tc3d < tc2d, "(b) 3D TC not below per-frame-style baseline");
                o.detail << "(a) FID-proxy transplant " << fmt(fid_t) << " vs scratch " << fmt(fid_s) << " after "
                         << budget.finetune_steps << " steps; (b) mean TC 3D " << fmt(tc3d) << " vs per-frame styles "
                         << fmt(tc2d);
                return o;
            });
        } catch (const std::exception& e) {
            for (int k : {7, 8, 9}) {
                if (!want(k) || reported.count(k) > 0) continue;
                Outcome o;
                o.pass = false;
                o.detail << "desk pipeline failed: " << e.what();
                report(k, "desk-scale pipeline", o);
            }
        }
    }

    guarded(10, "CLI end-to-end smoke", [&] { return criterion_cli(cli_path, fs::path(workdir) / "cli"); });
    guarded(11, "interpolation endpoints",
            [&] { return criterion_interpolation(budget.seed, full ? &full->bundle : nullptr); });

    std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
    return failures == 0 ? 0 : 1;
}
