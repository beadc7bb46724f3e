#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "nerf_i2i/adaptor.hpp"
#include "nerf_i2i/data.hpp"
#include "nerf_i2i/i2i.hpp"
#include "nerf_i2i/metrics.hpp"
#include "nerf_i2i/model.hpp"
#include "nerf_i2i/training.hpp"

namespace nerf_i2i {

struct DataSettings {
    std::string source = "synthetic";  ///< "synthetic" | "folder"
    std::string path;                  ///< folder source root
    std::int64_t n_per_class = 2000;
    std::vector<SceneSpec> classes;
};

struct TranslateSettings {
    std::int64_t source_class = 1;
    std::int64_t target_class = 2;
    std::int64_t n_videos = 1;
    std::int64_t n_frames = 16;
    double yaw_start = -0.6;
    double yaw_end = 0.6;
    double pitch = 0.0;
};

/// Paths to the artifacts of earlier stages; empty means the sibling stage directory.
struct StageInputs {
    std::string dataset;
    std::string checkpoint;
    std::string videos;
    std::string translations;
};

/// Fully resolved, validated run configuration.
struct RunConfig {
    nlohmann::json resolved;
    std::uint64_t seed = 0;
    ArchConfig arch;
    RenderConfig train_render;
    RenderConfig eval_render;
    CameraPrior prior;
    GanTrainConfig gan;
    AdaptorTrainConfig adaptor_train;
    AdaptorConfig adaptor;
    std::string finetune_init = "transplant";  ///< "transplant" | "scratch"
    DataSettings data;
    TranslateSettings translate;
    MetricProtocol metrics;
    StageInputs inputs;
};

/// Every accepted key with its default value.
nlohmann::json default_config();

/// Overlays `user` onto the defaults (unknown keys rejected), applies KEY=VALUE
/// overrides (dotted path, or a bare key when it names exactly one leaf) and
/// validates every block. Throws ConfigError with the offending field.
RunConfig resolve_config(const nlohmann::json& user, const std::vector<std::string>& overrides);

RunConfig config_from_resolved(const nlohmann::json& resolved);

}  // namespace nerf_i2i
