#pragma once

#include "rigsplat/config.hpp"
#include "rigsplat/density.hpp"
#include "rigsplat/model.hpp"
#include "rigsplat/optim.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rigsplat {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Complete training state.
struct Checkpoint {
    TrainConfig config;
    Model model;
    OptimState optim;
    DensifyStats stats;
    long iteration = 0;
    std::string rng_state;   ///< textual std::mt19937_64 state
};

// Binary layout, little-endian:
//   "RSPLATCK"  u32 version
//   then sections: u32 tag, u64 byte length, payload
// Tags: 1 config JSON, 2 rig text, 3 model flags and background, 4 Gaussians,
// 5 adjuster, 6 optimizer, 7 densification stats, 8 iteration, 9 RNG state.
// Doubles are stored as raw IEEE-754 binary64, so round trips are bit-exact.

std::vector<unsigned char> serialize_checkpoint(const Checkpoint &ckpt);
/// Throws LoadError on bad magic, unknown version, truncation or missing sections.
Checkpoint deserialize_checkpoint(std::span<const unsigned char> bytes);

void save_checkpoint(const std::string &path, const Checkpoint &ckpt);
Checkpoint load_checkpoint(const std::string &path);

} // namespace rigsplat
