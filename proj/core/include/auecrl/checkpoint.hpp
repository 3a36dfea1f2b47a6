#pragma once

#include <cstdint>
#include <string>

#include "auecrl/model.hpp"

namespace auecrl {

struct CheckpointMeta {
  std::uint32_t version = 1;
  int stage = 0;  // last completed training stage, 0 = fresh init
  std::uint64_t config_hash = 0;
};

// Hash of the shape-relevant model configuration, stored in checkpoints so a
// resumed run can detect an incompatible setup. Loss weights are excluded on
// purpose: resuming with a different alpha/lambda is legitimate.
std::uint64_t config_hash(const ModelConfig& config);

// Binary format: magic "AUECRL1\n", then little-endian u32 tensor count and
// per tensor u32 name length, UTF-8 name, u32 rank, u32 dims, IEEE-754
// binary64 values row-major. No padding. Metadata rides along as reserved
// "meta.*" tensors ahead of the parameters, which keeps save->load->save
// byte-identical.
void save_checkpoint(const ModelState& state, const CheckpointMeta& meta,
                     const std::string& path);

// Fills `state` parameter values; shapes must match the state's config
// (ShapeError naming the tensor otherwise). Returns the stored metadata.
CheckpointMeta load_checkpoint(ModelState& state, const std::string& path);

}  // namespace auecrl
