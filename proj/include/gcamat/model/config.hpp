#pragma once

#include "gcamat/gca/config.hpp"

namespace gcamat::model {

// Desk-scale defaults: 4 encoder stages, channels base*2^i, 2 residual
// blocks per stage. The guided attention stage sits at 1/8 resolution (the
// 64x64 stage for 512 inputs); the image-feature extractor is a fixed
// sequence of three stride-2 convolutions, so the downsample factor is 8.
struct ModelConfig {
    int base_channels = 16;
    int stages = 4;
    int blocks_per_stage = 2;
    int gca_downsample = 8;
    bool use_gca = true;
    int input_channels = 6;  // 3 image + 3 one-hot trimap
    gca::GcaConfig gca;

    int stage_channels(int i) const { return base_channels << i; }
    int guide_channels() const { return base_channels << 2; }
    // Spatial divisibility required by forward(); infer_full pads to this.
    int size_multiple() const { return std::max(32, 1 << (stages + 1)); }

    void validate() const {
        if (base_channels < 1) throw ConfigError("model: base_channels must be positive");
        if (stages < 3) throw ConfigError("model: need at least 3 encoder stages");
        if (blocks_per_stage < 1) throw ConfigError("model: blocks_per_stage must be positive");
        if (input_channels != 6)
            throw ConfigError("model: input is the 3-channel image plus a 3-channel one-hot trimap");
        if (gca_downsample != 8)
            throw ConfigError(
                "model: the three stride-2 extractor convolutions fix gca_downsample at 8");
        gca.validate();
    }
};

}  // namespace gcamat::model
