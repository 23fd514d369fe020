#pragma once

#include <filesystem>
#include <optional>

#include "wseg/model.hpp"

namespace wseg {

struct CheckpointInfo {
    ModelConfig config;
    int epoch = 0;
    double best_val_dice = 0.0;
};

// Binary format: "WSEG" magic, u32 version, length-prefixed config text block,
// then per tensor a length-prefixed name, u32 rank, u32 dims and raw
// little-endian 32-bit floats. Round trips are bit-exact.
void save_checkpoint(Model& model, const std::filesystem::path& path, int epoch = 0,
                     double best_val_dice = 0.0);

// Rebuilds the model from the embedded config and restores every tensor.
// When `expected` is given, its architecture must match the stored config.
Model load_checkpoint(const std::filesystem::path& path,
                      const std::optional<ModelConfig>& expected = std::nullopt,
                      CheckpointInfo* info = nullptr);

}  // namespace wseg
