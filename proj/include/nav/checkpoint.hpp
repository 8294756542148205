#pragma once

#include <cstdint>
#include <string>

#include "nav/config.hpp"
#include "nav/model_params.hpp"

namespace nav {

// Binary checkpoint: magic "TDSP", u32 format version, u32 header length, a
// JSON header (config snapshot, ablation flags, iteration, seed, parameter
// names/shapes), then the raw little-endian f32 payload: parameter values
// followed by the Adam first and second moments, in parameter order. Values
// are held as f64 in memory and truncated to f32 on save; a reloaded model
// therefore reproduces its own forward outputs bitwise.
inline constexpr char kCheckpointMagic[4] = {'T', 'D', 'S', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  RunConfig cfg;
  AblationFlags flags;
  int iteration = 0;
  std::uint64_t seed = 0;
};

void save_checkpoint(const std::string& path, const ModelParams& mp, const CheckpointMeta& meta);

struct LoadedCheckpoint {
  ModelParams mp;
  CheckpointMeta meta;
};

// Rejects any version mismatch instead of coercing.
LoadedCheckpoint load_checkpoint(const std::string& path);

// Inference may ablate mechanisms beyond what the checkpoint was trained
// with, but can never re-enable one; throws ShapeError otherwise.
void require_flag_compatibility(const AblationFlags& trained, const AblationFlags& requested);

}  // namespace nav
