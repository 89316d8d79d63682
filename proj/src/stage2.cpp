#include "dmfour/stage2.hpp"

#include "dmfour/fourier.hpp"

namespace dmfour {

MultiScaleBlock init_multiscale_block(std::size_t channels, Rng& rng)
{
    const std::size_t q = channels / 4;
    MultiScaleBlock b;
    b.reduce = make_conv(rng, channels, q, 1);
    for (std::size_t i = 0; i < kMultiScaleKernels.size(); ++i) {
        b.branches[i] = make_conv(rng, q, q, kMultiScaleKernels[i]);
    }
    b.merge = make_conv(rng, channels, channels, 1, 1, 0.1);
    return b;
}

FfcBlock init_ffc_block(std::size_t channels, Rng& rng)
{
    const std::size_t half = channels / 2;
    FfcBlock b;
    b.local_conv = make_conv(rng, half, half, 3);
    b.global_conv = make_conv(rng, channels, channels, 1);
    b.merge = make_conv(rng, channels, channels, 1, 1, 0.1);
    return b;
}

Stage2Net Stage2Net::init(const ModelConfig& cfg, Rng& rng)
{
    const std::size_t c = cfg.stage2_width;
    if (c % 4 != 0) {
        throw std::invalid_argument("stage2 width must be divisible by 4, got " + std::to_string(c));
    }
    Stage2Net net;
    net.encoder = {make_conv(rng, 3, c / 2, 3, 2), make_conv(rng, c / 2, c, 3, 2)};
    for (std::size_t i = 0; i < kDualPathBlocks; ++i) {
        net.ms_blocks.push_back(init_multiscale_block(c, rng));
    }
    for (std::size_t i = 0; i < kDualPathBlocks; ++i) {
        net.ffc_blocks.push_back(init_ffc_block(c, rng));
    }
    net.fuse = make_conv(rng, 2 * c, c, 1);
    net.decoder = {make_conv(rng, c, c / 2, 3), make_conv(rng, c / 2, 3, 3, 1, 0.1)};
    return net;
}

Var multiscale_block_forward(Var f, const MultiScaleBlock& p)
{
    const Shape& s = f.shape();
    if (s.size() != 4 || s[1] % 4 != 0) {
        throw ShapeError("multiscale_block_forward: channel count must be divisible by 4, got " + shape_str(s));
    }
    const Var r = conv2d(f, p.reduce);
    const Var gate = sigmoid(r);
    std::vector<Var> outs;
    for (const ConvSpec& branch : p.branches) {
        outs.push_back(mul(conv2d(r, branch), gate));
    }
    return add(f, conv2d(concat_channels(outs), p.merge));
}

Var ffc_block_forward(Var f, const FfcBlock& p, double slope, double* max_imag_residue)
{
    const Shape& s = f.shape();
    if (s.size() != 4 || s[1] % 2 != 0) {
        throw ShapeError("ffc_block_forward: channel count must be even, got " + shape_str(s));
    }
    const std::size_t half = s[1] / 2;
    const Var local = leaky_relu(conv2d(slice_channels(f, 0, half), p.local_conv), slope);

    const ComplexVar spec = fft2(slice_channels(f, half, half));
    const std::array<Var, 2> stacked{spec.re, spec.im};
    const Var mixed = conv2d(concat_channels(stacked), p.global_conv);
    const ComplexVar back = ifft2(ComplexVar{slice_channels(mixed, 0, half), slice_channels(mixed, half, half)});
    if (max_imag_residue != nullptr) {
        *max_imag_residue = max_abs(back.im.value());
    }
    const std::array<Var, 2> merged{local, back.re};
    return add(f, conv2d(concat_channels(merged), p.merge));
}

Var stage2_forward(Var i_s1, const Stage2Net& net, const Stage2Options& opt, Stage2Trace* trace)
{
    const Shape& s = i_s1.shape();
    if (s.size() != 4 || s[1] != 3) {
        throw ShapeError("stage2_forward: expected B3HW input, got " + shape_str(s));
    }
    if (s[2] % 4 != 0 || s[3] % 4 != 0) {
        throw ShapeError("stage2_forward: spatial size " + std::to_string(s[2]) + "x" + std::to_string(s[3]) +
                         " must be divisible by 4; pad the input");
    }
    const double slope = opt.leaky_slope;
    const Var encoded = conv_lrelu(conv_lrelu(i_s1, net.encoder[0], slope), net.encoder[1], slope);

    Var ms = encoded;
    if (opt.ablation.multiscale_path) {
        for (const MultiScaleBlock& b : net.ms_blocks) {
            ms = multiscale_block_forward(ms, b);
        }
    }
    Var ffc = encoded;
    if (opt.ablation.ffc_path) {
        for (const FfcBlock& b : net.ffc_blocks) {
            ffc = ffc_block_forward(ffc, b, slope);
        }
    }
    if (trace != nullptr) {
        *trace = Stage2Trace{encoded, encoded, encoded, ms, ffc};
    }
    const std::array<Var, 2> paths{ms, ffc};
    Var x = conv2d(concat_channels(paths), net.fuse);
    x = conv_lrelu(upsample_nearest2x(x), net.decoder[0], slope);
    x = conv2d(upsample_nearest2x(x), net.decoder[1]);
    return add(i_s1, x);
}

} // namespace dmfour
