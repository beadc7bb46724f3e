#pragma once

#include <filesystem>
#include <functional>
#include <random>

#include "nerf_i2i/checkpoint.hpp"
#include "nerf_i2i/data.hpp"
#include "nerf_i2i/losses.hpp"
#include "nerf_i2i/model.hpp"

namespace nerf_i2i {

struct GanTrainConfig {
    std::int64_t steps = 200;
    std::int64_t batch = 8;
    double lr = 2e-4;
    double beta1 = 0.0;
    double beta2 = 0.99;
    LossWeights weights;                   ///< r1 (lambda) and path (beta) are used here
    std::int64_t path_positions = 64;      ///< K for the NeRF-path surrogate
    std::int64_t checkpoint_interval = 0;  ///< 0: only the final checkpoint
    std::filesystem::path checkpoint_dir;  ///< where interval checkpoints go (step_NNNNNN/)
    RenderConfig render;                   ///< height/width are taken from the architecture
    CameraPrior prior;
    std::uint64_t seed = 0;

    void validate() const;
};

struct GanStepLog {
    std::int64_t step;
    double d_loss;
    double g_loss;
    double r1;
    double path;
    double real_score;  ///< mean D(real)_l
    double fake_score;  ///< mean D(fake)_l
};

struct GanTrainResult {
    Checkpoint checkpoint;
    std::vector<GanStepLog> log;
};

/// Alternating D / G optimization (1:1, R1 every step). The generator step descends
/// -mean v(D(G(z))_l) + beta * L_path; the discriminator step descends
/// -(mean v(-D(fake)_l) + mean v(D(real)_l)) + lambda * R1. Unconditional models use
/// their single output. Labels are drawn uniformly per sample; real images are drawn
/// from the matching class.
class GanTrainer {
public:
    GanTrainer(const Checkpoint& init, const ImageDataset& data, GanTrainConfig cfg);

    GanStepLog step();
    std::int64_t steps_done() const { return step_; }
    Checkpoint checkpoint() const;
    StyleNeRF& model() { return model_; }

private:
    struct Batch {
        torch::Tensor z, labels, real;
        std::vector<CameraPose> poses;
    };
    Batch draw_batch();
    torch::Tensor scores(const torch::Tensor& images);

    const ImageDataset& data_;
    GanTrainConfig cfg_;
    StyleNeRF model_{nullptr};
    nlohmann::json lineage_;
    std::unique_ptr<torch::optim::Adam> g_opt_, d_opt_;
    torch::Generator gen_;
    torch::Generator render_gen_;
    std::mt19937_64 camera_rng_;
    std::int64_t step_ = 0;
};

/// Runs `cfg.steps` trainer steps, writing interval checkpoints when configured.
GanTrainResult train_gan(const Checkpoint& init, const ImageDataset& data, const GanTrainConfig& cfg,
                         const std::function<void(const GanStepLog&)>& on_step = {});

/// Fresh unconditional model (seeded) trained on `data`, labels ignored.
GanTrainResult pretrain_unconditional(const ImageDataset& data, const ArchConfig& arch, const GanTrainConfig& cfg,
                                      const std::function<void(const GanStepLog&)>& on_step = {});

/// Per-class training from a conditional checkpoint (transplanted or scratch).
GanTrainResult train_conditional(const Checkpoint& init, const ImageDataset& data, const GanTrainConfig& cfg,
                                 const std::function<void(const GanStepLog&)>& on_step = {});

}  // namespace nerf_i2i
