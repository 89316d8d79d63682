#include "dmfour/conv.hpp"

#include <algorithm>
#include <cmath>

namespace dmfour {

namespace {

// Half-open range of output positions whose input tap (pos*stride + offset - padding) is in [0, extent).
struct TapRange {
    std::size_t begin = 0;
    std::size_t end = 0;
};

TapRange valid_range(std::size_t out_extent, std::size_t in_extent, std::size_t offset, std::size_t stride,
                     std::size_t padding)
{
    // need 0 <= pos*stride + offset - padding < in_extent
    const auto off = static_cast<long>(offset) - static_cast<long>(padding);
    const auto s = static_cast<long>(stride);
    long lo = 0;
    if (off < 0) {
        lo = (-off + s - 1) / s;
    }
    long hi = (static_cast<long>(in_extent) - 1 - off);
    hi = hi < 0 ? -1 : hi / s;
    hi = std::min(hi, static_cast<long>(out_extent) - 1);
    if (hi < lo) {
        return {};
    }
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi + 1)};
}

struct Geometry {
    std::size_t B, Ci, H, W, Co, K, Ho, Wo, stride, padding;
};

Geometry geometry(const Shape& input, const Shape& kernel, std::size_t stride, std::size_t padding)
{
    Geometry g{};
    g.B = input[0];
    g.Ci = input[1];
    g.H = input[2];
    g.W = input[3];
    g.Co = kernel[0];
    g.K = kernel[2];
    g.stride = stride;
    g.padding = padding;
    g.Ho = (g.H + 2 * padding - g.K) / stride + 1;
    g.Wo = (g.W + 2 * padding - g.K) / stride + 1;
    return g;
}

// Visits every (input index, output index) pair of one kernel tap, row by row.
template <class F>
void for_each_tap(const Geometry& g, std::size_t ky, std::size_t kx, F f)
{
    const TapRange ry = valid_range(g.Ho, g.H, ky, g.stride, g.padding);
    const TapRange rx = valid_range(g.Wo, g.W, kx, g.stride, g.padding);
    if (g.stride == 1) {
        // Contiguous rows; unsigned wrap-around in `shift` cancels once x >= rx.begin.
        const std::size_t shift = kx - g.padding;
        for (std::size_t y = ry.begin; y < ry.end; ++y) {
            const std::size_t in_row = (y + ky - g.padding) * g.W + shift;
            const std::size_t out_row = y * g.Wo;
            for (std::size_t x = rx.begin; x < rx.end; ++x) {
                f(in_row + x, out_row + x);
            }
        }
        return;
    }
    for (std::size_t y = ry.begin; y < ry.end; ++y) {
        const std::size_t iy = y * g.stride + ky - g.padding;
        for (std::size_t x = rx.begin; x < rx.end; ++x) {
            const std::size_t ix = x * g.stride + kx - g.padding;
            f(iy * g.W + ix, y * g.Wo + x);
        }
    }
}

// Sum over one kernel tap of input * output-gradient. Rows of stride-1 taps are contiguous and
// reduced with four interleaved partial sums in a fixed order.
double tap_dot(const Geometry& g, std::size_t ky, std::size_t kx, const double* src, const double* go)
{
    if (g.stride != 1) {
        double acc = 0.0;
        for_each_tap(g, ky, kx, [&](std::size_t in_idx, std::size_t out_idx) { acc += src[in_idx] * go[out_idx]; });
        return acc;
    }
    const TapRange ry = valid_range(g.Ho, g.H, ky, 1, g.padding);
    const TapRange rx = valid_range(g.Wo, g.W, kx, 1, g.padding);
    const std::size_t n = rx.end - rx.begin;
    double p0 = 0.0, p1 = 0.0, p2 = 0.0, p3 = 0.0;
    for (std::size_t y = ry.begin; y < ry.end; ++y) {
        const double* a = src + (y + ky - g.padding) * g.W + (rx.begin + kx - g.padding);
        const double* b = go + y * g.Wo + rx.begin;
        std::size_t x = 0;
        for (; x + 4 <= n; x += 4) {
            p0 += a[x] * b[x];
            p1 += a[x + 1] * b[x + 1];
            p2 += a[x + 2] * b[x + 2];
            p3 += a[x + 3] * b[x + 3];
        }
        for (; x < n; ++x) {
            p0 += a[x] * b[x];
        }
    }
    return (p0 + p1) + (p2 + p3);
}

} // namespace

ConvSpec ConvSpec::zeros(std::size_t in_ch, std::size_t out_ch, std::size_t k, std::size_t stride)
{
    return ConvSpec{Tensor({out_ch, in_ch, k, k}), Tensor({out_ch}), stride, (k - 1) / 2};
}

ConvSpec ConvSpec::identity(std::size_t in_ch, std::size_t out_ch)
{
    ConvSpec spec = zeros(in_ch, out_ch, 1);
    for (std::size_t c = 0; c < std::min(in_ch, out_ch); ++c) {
        spec.kernel[c * in_ch + c] = 1.0;
    }
    return spec;
}

void validate_conv(const Shape& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
                   std::size_t padding)
{
    if (input.size() != 4) {
        throw ShapeError("conv2d: input must be BCHW, got " + shape_str(input));
    }
    if (kernel.rank() != 4 || kernel.dim(2) != kernel.dim(3)) {
        throw ShapeError("conv2d: kernel must be (out, in, k, k), got " + shape_str(kernel.shape()));
    }
    if (kernel.dim(1) != input[1]) {
        throw ShapeError("conv2d: input has " + std::to_string(input[1]) + " channels but kernel expects " +
                         std::to_string(kernel.dim(1)));
    }
    if (bias.rank() != 1 || bias.dim(0) != kernel.dim(0)) {
        throw ShapeError("conv2d: bias shape " + shape_str(bias.shape()) + " does not match " +
                         std::to_string(kernel.dim(0)) + " output channels");
    }
    if (stride == 0) {
        throw ShapeError("conv2d: stride must be positive");
    }
    const std::size_t k = kernel.dim(2);
    if (input[2] + 2 * padding < k || input[3] + 2 * padding < k) {
        throw ShapeError("conv2d: padded input " + shape_str(input) + " smaller than kernel size " +
                         std::to_string(k));
    }
}

Shape conv_output_shape(const Shape& input, const Tensor& kernel, std::size_t stride, std::size_t padding)
{
    const Geometry g = geometry(input, kernel.shape(), stride, padding);
    return {g.B, g.Co, g.Ho, g.Wo};
}

Tensor conv2d(const Tensor& input, const ConvSpec& spec)
{
    return conv2d(input, spec.kernel, spec.bias, spec.stride, spec.padding);
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t padding)
{
    validate_conv(input.shape(), kernel, bias, stride, padding);
    const Geometry g = geometry(input.shape(), kernel.shape(), stride, padding);
    Tensor out({g.B, g.Co, g.Ho, g.Wo});
    const std::size_t in_plane = g.H * g.W;
    const std::size_t out_plane = g.Ho * g.Wo;
    if (g.stride == 1) {
        // Row-blocked: one output row of every channel stays in cache while all taps accumulate.
        // Per-element summation order (input channel, then ky, then kx) matches the generic path.
        for (std::size_t b = 0; b < g.B; ++b) {
            for (std::size_t y = 0; y < g.Ho; ++y) {
                for (std::size_t o = 0; o < g.Co; ++o) {
                    double* dst = &out[(b * g.Co + o) * out_plane + y * g.Wo];
                    std::fill_n(dst, g.Wo, bias[o]);
                    for (std::size_t i = 0; i < g.Ci; ++i) {
                        const double* plane = &input[(b * g.Ci + i) * in_plane];
                        const double* w = &kernel[(o * g.Ci + i) * g.K * g.K];
                        for (std::size_t ky = 0; ky < g.K; ++ky) {
                            const std::size_t iy = y + ky;
                            if (iy < g.padding || iy - g.padding >= g.H) {
                                continue;
                            }
                            const double* src_row = plane + (iy - g.padding) * g.W;
                            for (std::size_t kx = 0; kx < g.K; ++kx) {
                                const TapRange rx = valid_range(g.Wo, g.W, kx, 1, g.padding);
                                const double wv = w[ky * g.K + kx];
                                const double* src = src_row + kx - g.padding;
                                for (std::size_t x = rx.begin; x < rx.end; ++x) {
                                    dst[x] += wv * src[x];
                                }
                            }
                        }
                    }
                }
            }
        }
        return out;
    }
    for (std::size_t b = 0; b < g.B; ++b) {
        for (std::size_t o = 0; o < g.Co; ++o) {
            double* dst = &out[(b * g.Co + o) * out_plane];
            std::fill_n(dst, out_plane, bias[o]);
            for (std::size_t i = 0; i < g.Ci; ++i) {
                const double* src = &input[(b * g.Ci + i) * in_plane];
                const double* w = &kernel[(o * g.Ci + i) * g.K * g.K];
                for (std::size_t ky = 0; ky < g.K; ++ky) {
                    for (std::size_t kx = 0; kx < g.K; ++kx) {
                        const double wv = w[ky * g.K + kx];
                        for_each_tap(g, ky, kx, [&](std::size_t in_idx, std::size_t out_idx) {
                            dst[out_idx] += wv * src[in_idx];
                        });
                    }
                }
            }
        }
    }
    return out;
}

Tensor conv2d_grad_input(const Tensor& grad_out, const Tensor& kernel, const Shape& input_shape,
                         std::size_t stride, std::size_t padding)
{
    const Geometry g = geometry(input_shape, kernel.shape(), stride, padding);
    Tensor grad(input_shape);
    const std::size_t in_plane = g.H * g.W;
    const std::size_t out_plane = g.Ho * g.Wo;
    if (g.stride == 1) {
        // Row-blocked over input rows; per-element order (output channel, ky, kx) matches the generic path.
        for (std::size_t b = 0; b < g.B; ++b) {
            for (std::size_t i = 0; i < g.Ci; ++i) {
                for (std::size_t iy = 0; iy < g.H; ++iy) {
                    double* gi = &grad[(b * g.Ci + i) * in_plane + iy * g.W];
                    for (std::size_t o = 0; o < g.Co; ++o) {
                        const double* plane = &grad_out[(b * g.Co + o) * out_plane];
                        const double* w = &kernel[(o * g.Ci + i) * g.K * g.K];
                        for (std::size_t ky = 0; ky < g.K; ++ky) {
                            // output row y reads input row y + ky - padding
                            const std::size_t shifted = iy + g.padding;
                            if (shifted < ky || shifted - ky >= g.Ho) {
                                continue;
                            }
                            const double* go_row = plane + (shifted - ky) * g.Wo;
                            for (std::size_t kx = 0; kx < g.K; ++kx) {
                                const TapRange rx = valid_range(g.Wo, g.W, kx, 1, g.padding);
                                const double wv = w[ky * g.K + kx];
                                double* dst = gi + kx - g.padding;
                                for (std::size_t x = rx.begin; x < rx.end; ++x) {
                                    dst[x] += wv * go_row[x];
                                }
                            }
                        }
                    }
                }
            }
        }
        return grad;
    }
    for (std::size_t b = 0; b < g.B; ++b) {
        for (std::size_t o = 0; o < g.Co; ++o) {
            const double* go = &grad_out[(b * g.Co + o) * out_plane];
            for (std::size_t i = 0; i < g.Ci; ++i) {
                double* gi = &grad[(b * g.Ci + i) * in_plane];
                const double* w = &kernel[(o * g.Ci + i) * g.K * g.K];
                for (std::size_t ky = 0; ky < g.K; ++ky) {
                    for (std::size_t kx = 0; kx < g.K; ++kx) {
                        const double wv = w[ky * g.K + kx];
                        for_each_tap(g, ky, kx, [&](std::size_t in_idx, std::size_t out_idx) {
                            gi[in_idx] += wv * go[out_idx];
                        });
                    }
                }
            }
        }
    }
    return grad;
}

Tensor conv2d_grad_kernel(const Tensor& grad_out, const Tensor& input, const Shape& kernel_shape,
                          std::size_t stride, std::size_t padding)
{
    const Geometry g = geometry(input.shape(), kernel_shape, stride, padding);
    Tensor grad(kernel_shape);
    const std::size_t in_plane = g.H * g.W;
    const std::size_t out_plane = g.Ho * g.Wo;
    for (std::size_t o = 0; o < g.Co; ++o) {
        for (std::size_t i = 0; i < g.Ci; ++i) {
            double* gw = &grad[(o * g.Ci + i) * g.K * g.K];
            for (std::size_t b = 0; b < g.B; ++b) {
                const double* go = &grad_out[(b * g.Co + o) * out_plane];
                const double* src = &input[(b * g.Ci + i) * in_plane];
                for (std::size_t ky = 0; ky < g.K; ++ky) {
                    for (std::size_t kx = 0; kx < g.K; ++kx) {
                        gw[ky * g.K + kx] += tap_dot(g, ky, kx, src, go);
                    }
                }
            }
        }
    }
    return grad;
}

Tensor conv2d_grad_bias(const Tensor& grad_out)
{
    const std::size_t B = grad_out.dim(0);
    const std::size_t C = grad_out.dim(1);
    const std::size_t plane = grad_out.dim(2) * grad_out.dim(3);
    Tensor grad({C});
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t c = 0; c < C; ++c) {
            const double* go = &grad_out[(b * C + c) * plane];
            double acc = 0.0;
            for (std::size_t k = 0; k < plane; ++k) {
                acc += go[k];
            }
            grad[c] += acc;
        }
    }
    return grad;
}

Tensor leaky_relu(const Tensor& x, double slope)
{
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] >= 0.0 ? x[i] : slope * x[i];
    }
    return out;
}

double sigmoid(double x)
{
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Tensor sigmoid(const Tensor& x)
{
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = sigmoid(x[i]);
    }
    return out;
}

Tensor softmax_rows(const Tensor& x)
{
    if (x.rank() == 0) {
        throw ShapeError("softmax_rows: scalar input");
    }
    const std::size_t n = x.shape().back();
    Tensor out(x.shape());
    if (n == 0) {
        return out;
    }
    for (std::size_t row = 0; row < x.size() / n; ++row) {
        const double* src = &x[row * n];
        double* dst = &out[row * n];
        const double m = *std::max_element(src, src + n);
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            dst[j] = std::exp(src[j] - m);
            total += dst[j];
        }
        for (std::size_t j = 0; j < n; ++j) {
            dst[j] /= total;
        }
    }
    return out;
}

Tensor upsample_nearest2x(const Tensor& x)
{
    require_rank(x, 4, "upsample_nearest2x");
    const std::size_t BC = x.dim(0) * x.dim(1);
    const std::size_t H = x.dim(2);
    const std::size_t W = x.dim(3);
    Tensor out({x.dim(0), x.dim(1), 2 * H, 2 * W});
    for (std::size_t p = 0; p < BC; ++p) {
        for (std::size_t y = 0; y < 2 * H; ++y) {
            for (std::size_t xx = 0; xx < 2 * W; ++xx) {
                out[(p * 2 * H + y) * 2 * W + xx] = x[(p * H + y / 2) * W + xx / 2];
            }
        }
    }
    return out;
}

Tensor upsample_nearest2x_grad(const Tensor& grad_out)
{
    const std::size_t BC = grad_out.dim(0) * grad_out.dim(1);
    const std::size_t H = grad_out.dim(2) / 2;
    const std::size_t W = grad_out.dim(3) / 2;
    Tensor grad({grad_out.dim(0), grad_out.dim(1), H, W});
    for (std::size_t p = 0; p < BC; ++p) {
        for (std::size_t y = 0; y < 2 * H; ++y) {
            for (std::size_t xx = 0; xx < 2 * W; ++xx) {
                grad[(p * H + y / 2) * W + xx / 2] += grad_out[(p * 2 * H + y) * 2 * W + xx];
            }
        }
    }
    return grad;
}

} // namespace dmfour
