#pragma once

#include <string>

#include "sawu/model.hpp"

namespace sawu {

struct Checkpoint {
    ModelConfig config;
    NetVariant variant = NetVariant::Sawu;
    ModelParams params;
};

// Self-describing binary checkpoint, little-endian throughout:
//   "SAWUCKP1" | u32 version | u8 variant | config fields |
//   u32 tensor count | per tensor: u32 name len, name, u32 rows, u32 cols, f64 data
// Round-trips bit-exact.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace sawu
