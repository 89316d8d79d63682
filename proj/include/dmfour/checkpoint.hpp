#pragma once

#include "dmfour/config.hpp"
#include "dmfour/image_io.hpp"
#include "dmfour/model.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace dmfour {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointManifest {
    std::string config; ///< canonical config text
    std::uint64_t seed = 0;
    std::uint64_t iteration = 0;
    std::uint32_t version = kCheckpointVersion;
};

/// Layout: "DMFLCKPT", u32 version, u64 manifest length, JSON manifest, u64 block count, then per
/// parameter in declaration order: u32 name length, name, u32 rank, u64 dims, float64 values.
/// All integers and floats are little-endian.
std::string serialize_checkpoint(const Model& model, const CheckpointManifest& manifest);

struct Checkpoint {
    Model model;
    CheckpointManifest manifest;
    TrainConfig config;
};

/// Throws DataError on a bad magic, unsupported version, or parameter mismatch.
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Model& model, const CheckpointManifest& manifest);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace dmfour
