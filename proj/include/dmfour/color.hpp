#pragma once

#include "dmfour/tensor.hpp"

namespace dmfour {

/// Full-range BT.601 luma/chroma planes, each B1HW.
struct YcbcrImage {
    Tensor y;
    Tensor cb;
    Tensor cr;
};

/// Converts a B3HW image. Values outside [0, 1] are clamped; `clamped_count`, when given,
/// receives the number of clamped samples.
YcbcrImage rgb_to_ycbcr(const Tensor& rgb, std::size_t* clamped_count = nullptr);
Tensor ycbcr_to_rgb(const YcbcrImage& ycc);

/// Y plane only (B1HW).
Tensor luminance(const Tensor& rgb);

struct LuminanceTargetOptions {
    double eps = 1e-3;
    double clamp_max = 10.0;
};

/// |y_low - y_gt| / max(y_gt, eps), clamped to [0, clamp_max].
Tensor luminance_attention_target(const Tensor& y_low, const Tensor& y_gt, LuminanceTargetOptions opt = {});

} // namespace dmfour
