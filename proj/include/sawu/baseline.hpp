#pragma once

#include <iosfwd>

#include "sawu/model.hpp"

namespace sawu {

// Plain three-layer autoencoder baseline: the same loss, optimizer and
// schedule with the attention branch removed (per-pixel encode ->
// l1-normalize -> decode).
inline TrainResult baseline_ae_train(const HsiCube& cube, const ModelConfig& config,
                                     std::ostream* log = nullptr) {
    return train(cube, config, NetVariant::Baseline, log);
}

}  // namespace sawu
