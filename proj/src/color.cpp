#include "dmfour/color.hpp"

#include <algorithm>
#include <cmath>

namespace dmfour {

namespace {

constexpr double kR = 0.299;
constexpr double kG = 0.587;
constexpr double kB = 0.114;
constexpr double kCb = 0.564;
constexpr double kCr = 0.713;

void require_rgb(const Tensor& rgb, const char* what)
{
    require_rank(rgb, 4, what);
    if (rgb.dim(1) != 3) {
        throw ShapeError(std::string(what) + ": expected 3 channels, got " + std::to_string(rgb.dim(1)));
    }
}

} // namespace

YcbcrImage rgb_to_ycbcr(const Tensor& rgb, std::size_t* clamped_count)
{
    require_rgb(rgb, "rgb_to_ycbcr");
    const std::size_t B = rgb.dim(0);
    const std::size_t plane = rgb.dim(2) * rgb.dim(3);
    const Shape s{B, 1, rgb.dim(2), rgb.dim(3)};
    YcbcrImage out{Tensor(s), Tensor(s), Tensor(s)};
    std::size_t clamped = 0;
    auto fetch = [&](std::size_t idx) {
        const double v = rgb[idx];
        if (v < 0.0 || v > 1.0) {
            ++clamped;
            return std::clamp(v, 0.0, 1.0);
        }
        return v;
    };
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t i = 0; i < plane; ++i) {
            const double r = fetch((b * 3 + 0) * plane + i);
            const double g = fetch((b * 3 + 1) * plane + i);
            const double bl = fetch((b * 3 + 2) * plane + i);
            const double y = kR * r + kG * g + kB * bl;
            out.y[b * plane + i] = y;
            out.cb[b * plane + i] = 0.5 + (bl - y) * kCb;
            out.cr[b * plane + i] = 0.5 + (r - y) * kCr;
        }
    }
    if (clamped_count != nullptr) {
        *clamped_count = clamped;
    }
    return out;
}

Tensor ycbcr_to_rgb(const YcbcrImage& ycc)
{
    require_same_shape(ycc.y, ycc.cb, "ycbcr_to_rgb");
    require_same_shape(ycc.y, ycc.cr, "ycbcr_to_rgb");
    require_rank(ycc.y, 4, "ycbcr_to_rgb");
    const std::size_t B = ycc.y.dim(0);
    const std::size_t plane = ycc.y.dim(2) * ycc.y.dim(3);
    Tensor rgb({B, 3, ycc.y.dim(2), ycc.y.dim(3)});
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t i = 0; i < plane; ++i) {
            const double y = ycc.y[b * plane + i];
            const double r = y + (ycc.cr[b * plane + i] - 0.5) / kCr;
            const double bl = y + (ycc.cb[b * plane + i] - 0.5) / kCb;
            const double g = (y - kR * r - kB * bl) / kG;
            rgb[(b * 3 + 0) * plane + i] = r;
            rgb[(b * 3 + 1) * plane + i] = g;
            rgb[(b * 3 + 2) * plane + i] = bl;
        }
    }
    return rgb;
}

Tensor luminance(const Tensor& rgb)
{
    return rgb_to_ycbcr(rgb).y;
}

Tensor luminance_attention_target(const Tensor& y_low, const Tensor& y_gt, LuminanceTargetOptions opt)
{
    require_same_shape(y_low, y_gt, "luminance_attention_target");
    Tensor out(y_low.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = std::abs(y_low[i] - y_gt[i]) / std::max(y_gt[i], opt.eps);
        out[i] = std::clamp(v, 0.0, opt.clamp_max);
    }
    return out;
}

} // namespace dmfour
