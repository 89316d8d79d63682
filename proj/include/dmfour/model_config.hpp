#pragma once

#include <cstddef>

namespace dmfour {

/// Architecture hyperparameters shared by both stages.
struct ModelConfig {
    std::size_t stage1_width = 8;  ///< feature channels inside the Fourier reconstruction stage
    std::size_t stage2_width = 16; ///< feature channels inside the spatial/texture stage
    std::size_t lanet_depth = 2;
    std::size_t lanet_width = 8;
    double leaky_slope = 0.2;
    double lum_eps = 1e-3;
    double lum_clamp_max = 10.0;
};

/// Component toggles. Everything is enabled by default.
struct Ablation {
    bool luminance_branch = true;
    bool infrared_branch = true;
    bool luminance_augment = true;
    bool infrared_augment = true;
    bool ffc_path = true;
    bool multiscale_path = true;
    bool stage1 = true;
    bool stage2 = true;

    friend bool operator==(const Ablation&, const Ablation&) = default;
};

} // namespace dmfour
