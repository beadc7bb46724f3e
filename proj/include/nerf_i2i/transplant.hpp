#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nerf_i2i/adaptor.hpp"
#include "nerf_i2i/checkpoint.hpp"
#include "nerf_i2i/model.hpp"

namespace nerf_i2i {

/// Which target tensors are copied from which source tensors and which start fresh.
struct TransplantPlan {
    std::vector<std::pair<std::string, std::string>> copies;  ///< (source, target)
    std::vector<std::string> fresh;

    nlohmann::json to_json() const;
    static TransplantPlan from_json(const nlohmann::json& j);
};

/// Model of kind "unconditional" / "conditional" rebuilt from a checkpoint.
StyleNeRF load_model(const Checkpoint& ckpt);
/// Snapshot with kind, architecture, step and seed in the manifest.
Checkpoint model_checkpoint(const StyleNeRF& model, std::int64_t step, std::uint64_t seed,
                            nlohmann::json extra = nlohmann::json::object());

/// Unconditional model initialized from `seed`.
Checkpoint init_unconditional(const ArchConfig& arch, std::uint64_t seed);
/// Conditional model initialized from scratch (the no-transplant baseline).
Checkpoint init_conditional(const ArchConfig& arch, std::int64_t num_classes, std::uint64_t seed);

/// Unconditional -> multi-class model: M1, F and G copied verbatim; M2 copied from M
/// except its first layer (input grows to Z + E_dim); discriminator copied except the
/// final layer, replaced by a fresh L-output conv; embedding table fresh. Fresh tensors
/// get normal(0, 0.02) weights and zero biases. The plan is stored in the manifest.
Checkpoint transplant_conditional(const Checkpoint& unconditional, std::int64_t num_classes, std::uint64_t seed);

/// Conditional model -> I2I bundle: E := discriminator trunk; G, M1, M2, embeddings, F
/// copied; fresh adaptor; everything but the adaptor frozen.
Checkpoint assemble_i2i(const Checkpoint& conditional, AdaptorConfig adaptor, std::uint64_t seed);

}  // namespace nerf_i2i
