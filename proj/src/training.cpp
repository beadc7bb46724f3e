#include "nerf_i2i/training.hpp"

#include <cmath>
#include <cstdio>

#include "nerf_i2i/transplant.hpp"

namespace nerf_i2i {

namespace {

void check_finite(double v, const char* what, std::int64_t step) {
    if (!std::isfinite(v))
        throw NumericError(std::string(what) + " is not finite at step " + std::to_string(step));
}

std::string step_dir_name(std::int64_t step) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "step_%06lld", static_cast<long long>(step));
    return buf;
}

}  // namespace

void GanTrainConfig::validate() const {
    if (steps < 0) throw ConfigError("training: steps must be >= 0");
    if (batch < 1) throw ConfigError("training: batch must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("training: learning rate must be > 0");
    if (path_positions < 1) throw ConfigError("training: path_positions must be >= 1");
    if (checkpoint_interval < 0) throw ConfigError("training: checkpoint_interval must be >= 0");
    weights.validate();
    render.validate();
    prior.validate();
}

GanTrainer::GanTrainer(const Checkpoint& init, const ImageDataset& data, GanTrainConfig cfg)
    : data_(data),
      cfg_(std::move(cfg)),
      gen_(make_generator(sub_seed(cfg_.seed, "train"))),
      render_gen_(make_generator(sub_seed(cfg_.seed, "train-render"))),
      camera_rng_(sub_seed(cfg_.seed, "train-cameras")) {
    cfg_.validate();
    if (data_.size() == 0) throw ConfigError("training: dataset is empty");
    model_ = load_model(init);
    const auto& arch = model_->arch();
    if (data_.resolution() != arch.image_resolution())
        throw ConfigError("training: dataset resolution " + std::to_string(data_.resolution()) +
                          " differs from the model resolution " + std::to_string(arch.image_resolution()));
    if (model_->conditional()) {
        if (data_.num_classes() > model_->num_outputs())
            throw DataError("training: dataset has " + std::to_string(data_.num_classes()) +
                            " classes but the model has " + std::to_string(model_->num_outputs()));
        for (std::int64_t l = 1; l <= model_->num_outputs(); ++l)
            if (l > data_.num_classes() || data_.indices_of_class(l).empty())
                throw DataError("training: class " + std::to_string(l) + " has no images");
    }
    cfg_.render.height = cfg_.render.width = arch.feature_resolution;
    step_ = init.manifest.value("step", std::int64_t{0});

    lineage_ = nlohmann::json::object();
    for (const auto& key : {"init", "transplant", "source"})
        if (init.manifest.contains(key)) lineage_[key] = init.manifest.at(key);

    const auto opts = torch::optim::AdamOptions(cfg_.lr).betas({cfg_.beta1, cfg_.beta2});
    g_opt_ = std::make_unique<torch::optim::Adam>(model_->generator_parameters(), opts);
    d_opt_ = std::make_unique<torch::optim::Adam>(model_->disc->parameters(), opts);
    model_->train();
}

GanTrainer::Batch GanTrainer::draw_batch() {
    Batch b;
    const auto n = cfg_.batch;
    b.z = model_->sample_z(n, gen_);
    std::vector<std::int64_t> idx;
    if (model_->conditional()) {
        b.labels = torch::randint(1, model_->num_outputs() + 1, {n}, gen_, torch::kLong);
        for (std::int64_t i = 0; i < n; ++i) {
            const auto& pool = data_.indices_of_class(b.labels[i].item<std::int64_t>());
            const auto k = torch::randint(static_cast<std::int64_t>(pool.size()), {1}, gen_, torch::kLong);
            idx.push_back(pool[static_cast<std::size_t>(k.item<std::int64_t>())]);
        }
    } else {
        b.labels = torch::ones({n}, torch::kLong);
        auto k = torch::randint(data_.size(), {n}, gen_, torch::kLong);
        for (std::int64_t i = 0; i < n; ++i) idx.push_back(k[i].item<std::int64_t>());
    }
    b.real = data_.batch(idx);
    for (std::int64_t i = 0; i < n; ++i) b.poses.push_back(sample_camera(cfg_.prior, camera_rng_));
    return b;
}

torch::Tensor GanTrainer::scores(const torch::Tensor& images) { return model_->disc->forward(images).scores; }

GanStepLog GanTrainer::step() {
    GanStepLog log{};
    log.step = step_;
    auto* rgen = cfg_.render.stratified ? &render_gen_ : nullptr;

    // Discriminator step.
    {
        auto b = draw_batch();
        torch::Tensor fake;
        {
            torch::NoGradGuard no_grad;
            fake = model_->generate(b.z, b.labels, b.poses, cfg_.render, rgen).synthesis.image;
        }
        auto real = b.real.detach().requires_grad_(true);
        auto real_l = select_class(scores(real), b.labels);
        auto fake_l = select_class(scores(fake), b.labels);
        auto grad = torch::autograd::grad({real_l.sum()}, {real}, {}, true, true)[0];
        auto r1 = cfg_.weights.r1 * grad.pow(2).flatten(1).sum(1).mean();
        auto d_loss = -(logistic_v(-fake_l).mean() + logistic_v(real_l).mean()) + r1;
        log.d_loss = d_loss.item<double>();
        log.r1 = r1.item<double>();
        log.real_score = real_l.mean().item<double>();
        log.fake_score = fake_l.mean().item<double>();
        check_finite(log.d_loss, "discriminator loss", step_);
        d_opt_->zero_grad();
        d_loss.backward();
        d_opt_->step();
    }

    // Generator step.
    {
        auto b = draw_batch();
        auto out = model_->generate(b.z, b.labels, b.poses, cfg_.render, rgen);
        auto g_adv = generator_adversarial(scores(out.synthesis.image), b.labels);
        auto path = nerf_path_loss(
            out.feature_map, out.synthesis.image, [&](const torch::Tensor& f) { return model_->field->project_rgb(f); },
            cfg_.path_positions, sub_seed(cfg_.seed, "path") + static_cast<std::uint64_t>(step_));
        auto g_loss = g_adv + cfg_.weights.path * path;
        log.g_loss = g_loss.item<double>();
        log.path = path.item<double>();
        check_finite(log.g_loss, "generator loss", step_);
        g_opt_->zero_grad();
        d_opt_->zero_grad();
        g_loss.backward();
        g_opt_->step();
    }
    ++step_;
    return log;
}

Checkpoint GanTrainer::checkpoint() const { return model_checkpoint(model_, step_, cfg_.seed, lineage_); }

GanTrainResult train_gan(const Checkpoint& init, const ImageDataset& data, const GanTrainConfig& cfg,
                         const std::function<void(const GanStepLog&)>& on_step) {
    GanTrainer trainer(init, data, cfg);
    GanTrainResult result;
    for (std::int64_t i = 0; i < cfg.steps; ++i) {
        result.log.push_back(trainer.step());
        if (on_step) on_step(result.log.back());
        if (cfg.checkpoint_interval > 0 && !cfg.checkpoint_dir.empty() && (i + 1) % cfg.checkpoint_interval == 0)
            trainer.checkpoint().save(cfg.checkpoint_dir / step_dir_name(trainer.steps_done()));
    }
    result.checkpoint = trainer.checkpoint();
    return result;
}

GanTrainResult pretrain_unconditional(const ImageDataset& data, const ArchConfig& arch, const GanTrainConfig& cfg,
                                      const std::function<void(const GanStepLog&)>& on_step) {
    return train_gan(init_unconditional(arch, cfg.seed), data, cfg, on_step);
}

GanTrainResult train_conditional(const Checkpoint& init, const ImageDataset& data, const GanTrainConfig& cfg,
                                 const std::function<void(const GanStepLog&)>& on_step) {
    if (init.kind() != "conditional")
        throw ConfigError("conditional training needs a conditional checkpoint, got kind '" + init.kind() + "'");
    return train_gan(init, data, cfg, on_step);
}

}  // namespace nerf_i2i
