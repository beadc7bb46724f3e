#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nerf_i2i/config.hpp"

namespace nerf_i2i {

inline const std::vector<std::string> kSubcommands{"synth-data", "pretrain",  "finetune", "train-adaptor",
                                                   "translate",  "eval",      "orbit"};

/// Runs one workflow stage with an already resolved config. Artifacts go to
/// out_root/<stage>/ next to a config.json snapshot.
void run_stage(const std::string& stage, const RunConfig& cfg, const std::filesystem::path& out_root);

/// Command-line entry point. Exit codes: 0 success, 2 invalid config or arguments,
/// 1 runtime failure (message names the stage).
int run_cli(int argc, char** argv);

}  // namespace nerf_i2i
