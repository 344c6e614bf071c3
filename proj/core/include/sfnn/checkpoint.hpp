#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "sfnn/model.hpp"

namespace sfnn {

// Binary checkpoint layout, all integers and reals little-endian:
//
//   bytes 0-7    magic "SFNNCKPT"
//   u32          format version (1)
//   u64 x 6      lookback, horizon, hidden_width, num_blocks, n_series, num_mixing_blocks
//   u64          flags: 1 centering, 2 series mixing, 4 layer norm, 8 layer-norm affine
//   u64          tensor count
//   per tensor:  u64 element count, then that many IEEE-754 binary64 values
//
// Tensors appear in SFNNParams::tensors() order. A sidecar "<path>.meta.txt"
// holds "key = value" lines (config, tensor names, caller metadata).
inline constexpr char kCheckpointMagic[8] = {'S', 'F', 'N', 'N', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  SFNNConfig config;
  SFNNParams params;
};

void save_checkpoint(const std::filesystem::path& path, const SFNNConfig& config, const SFNNParams& params,
                     const std::map<std::string, std::string>& metadata = {});

/// Throws CheckpointError on a bad magic, version, or truncated file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::filesystem::path checkpoint_metadata_path(const std::filesystem::path& path);

}  // namespace sfnn
