#pragma once

#include <string>
#include <string_view>

#include "xmd/tensor.hpp"

namespace xmd {

// Checkpoint layout (all integers little-endian):
//   "XMDCKPT1"
//   repeated until EOF:
//     u16 name length, UTF-8 name, u8 rank, rank x u32 dims, prod(dims) x f64
//
// Trainable flags are not stored; loaded parameters come back trainable and
// the owner re-derives flags from names.

inline constexpr std::string_view kCheckpointMagic = "XMDCKPT1";

std::string encode_checkpoint(const ParamSet& params);
ParamSet decode_checkpoint(std::string_view bytes);

void save_checkpoint(const ParamSet& params, const std::string& path);
ParamSet load_checkpoint(const std::string& path);

}  // namespace xmd
