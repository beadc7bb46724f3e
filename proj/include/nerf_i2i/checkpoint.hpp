#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "nerf_i2i/common.hpp"

namespace nerf_i2i {

/// Named-tensor archive. On disk: <dir>/manifest.json + <dir>/tensors/<name>.f32le.
///
/// `manifest` carries free-form metadata (kind, architecture, step, seed, transplant
/// plan, trainable set); the "tensors" entry (name + shape list) is regenerated from
/// `tensors` on save. All tensors are stored as float32.
struct Checkpoint {
    nlohmann::json manifest = nlohmann::json::object();
    std::map<std::string, torch::Tensor> tensors;

    /// Snapshot of every parameter and buffer of `module`.
    static Checkpoint from_module(const torch::nn::Module& module, nlohmann::json manifest = nlohmann::json::object());

    /// Copies tensors into `module`. Requires the exact same name set and shapes.
    void apply_to(torch::nn::Module& module) const;

    void save(const std::filesystem::path& dir) const;
    static Checkpoint load(const std::filesystem::path& dir);

    std::string kind() const { return manifest.value("kind", std::string{}); }

    /// Exact equality of manifests and tensor bytes.
    bool identical(const Checkpoint& other) const;
};

/// Bytes-level comparison of two directory trees (names and contents).
bool directories_identical(const std::filesystem::path& a, const std::filesystem::path& b);

}  // namespace nerf_i2i
