// Binary network checkpoints.
//
// One file per trained interval network. Fixed little-endian layout
// (documented field by field in docs/file-formats.md) so checkpoints
// round-trip bitwise across runs and machines:
//
//   bytes 0-7   magic "DISCORE\0"
//   u32         format version (currently 1)
//   i32 x 8     S, d, K, k, depth, width, in_dim, out_dim
//   f64 x 2     clip bound C, query time t'
//   u64 x 2     init seed, parameter count
//   f64 x N     parameters, layer by layer, weights (row-major) then biases
//
// Every structural field is re-derived and cross-checked on load; any
// disagreement is a CheckpointError (exit code 4 at the CLI boundary).
#pragma once

#include <string>

#include "discore/score_net.hpp"

namespace discore {

inline constexpr uint32_t kCheckpointVersion = 1;

// K = total interval count of the run, k = this net's interval index.
void save_checkpoint(const ScoreNet& net, int K, int k, const std::string& path);

// Loads and validates; K_out/k_out receive the stored interval bookkeeping
// when non-null.
ScoreNet load_checkpoint(const std::string& path, int* K_out = nullptr,
                         int* k_out = nullptr);

// Conventional file name for interval k within an output directory:
// net_000.ckpt, net_001.ckpt, ...
std::string checkpoint_name(int k);

}  // namespace discore
