#include "dmfour/stage1.hpp"

#include "dmfour/fourier.hpp"

#include <optional>

namespace dmfour {

LaNetParams init_la_net(std::size_t depth, std::size_t width, Rng& rng)
{
    LaNetParams p;
    p.stem = make_conv(rng, 1, width, 3);
    std::size_t w = width;
    for (std::size_t l = 0; l < depth; ++l) {
        p.down.push_back(make_conv(rng, w, 2 * w, 3, 2));
        w *= 2;
    }
    // Decoder convs are stored shallow-to-deep, matching `down`.
    w = width;
    for (std::size_t l = 0; l < depth; ++l) {
        p.up.push_back(make_conv(rng, 2 * w, w, 3));
        p.fuse.push_back(make_conv(rng, 2 * w, w, 3));
        w *= 2;
    }
    p.head = make_conv(rng, width, 1, 1, 1, 0.1);
    return p;
}

Stage1Net Stage1Net::init(const ModelConfig& cfg, Rng& rng)
{
    const std::size_t c = cfg.stage1_width;
    Stage1Net net;
    net.entry_proj = make_conv(rng, 3, c, 1);
    for (std::size_t i = 0; i < kFourierComponents; ++i) {
        FourierComponent comp;
        comp.amp_conv = make_conv(rng, c, c, 1, 1, 0.1);
        comp.pha_conv = make_near_identity(rng, c, 0.1);
        comp.lum_refine = {make_conv(rng, c, c, 1), make_conv(rng, c, c, 1)};
        comp.inf_refine = {make_conv(rng, c, c, 1), make_conv(rng, c, c, 1)};
        net.components.push_back(std::move(comp));
    }
    net.la_net = init_la_net(cfg.lanet_depth, cfg.lanet_width, rng);
    net.lum_base = {make_conv(rng, 1, c, 1), make_conv(rng, c, c, 1)};
    net.inf_base = {make_conv(rng, 1, c, 1), make_conv(rng, c, c, 1)};
    net.exit_proj = make_conv(rng, c, 3, 1, 1, 0.1);
    return net;
}

Var la_net_forward(Var y_low, const LaNetParams& p, double slope)
{
    const Shape& s = y_low.shape();
    if (s.size() != 4 || s[1] != 1) {
        throw ShapeError("la_net_forward: expected B1HW input, got " + shape_str(s));
    }
    const std::size_t factor = std::size_t{1} << p.depth();
    if (s[2] % factor != 0 || s[3] % factor != 0) {
        throw ShapeError("la_net_forward: spatial size " + std::to_string(s[2]) + "x" + std::to_string(s[3]) +
                         " must be divisible by " + std::to_string(factor) + "; pad the input");
    }
    std::vector<Var> skips{conv_lrelu(y_low, p.stem, slope)};
    for (std::size_t l = 0; l < p.depth(); ++l) {
        skips.push_back(conv_lrelu(skips.back(), p.down[l], slope));
    }
    Var x = skips.back();
    for (std::size_t l = p.depth(); l-- > 0;) {
        Var up = conv_lrelu(upsample_nearest2x(x), p.up[l], slope);
        const std::array<Var, 2> parts{up, skips[l]};
        x = conv_lrelu(concat_channels(parts), p.fuse[l], slope);
    }
    return conv2d(x, p.head);
}

Tensor la_net_predict(const Tensor& y_low, const LaNetParams& p, double slope, double clamp_max)
{
    Tape tape;
    tape.set_grad_enabled(false);
    return clamp(la_net_forward(tape.constant(y_low), p, slope).value(), 0.0, clamp_max);
}

Var luminance_augment(Var a_out, Var a_lum)
{
    if (a_out.shape() != a_lum.shape()) {
        throw ShapeError("luminance_augment: shape mismatch " + shape_str(a_out.shape()) + " vs " +
                         shape_str(a_lum.shape()));
    }
    return add(mul(a_out, sigmoid(a_lum)), a_out);
}

Tensor luminance_augment(const Tensor& a_out, const Tensor& a_lum)
{
    Tape tape;
    return luminance_augment(tape.constant(a_out), tape.constant(a_lum)).value();
}

Var infrared_augment(Var p_out, Var p_inf, Var* attention)
{
    const Shape s = p_out.shape();
    if (s != p_inf.shape()) {
        throw ShapeError("infrared_augment: shape mismatch " + shape_str(s) + " vs " + shape_str(p_inf.shape()));
    }
    if (s.size() != 4) {
        throw ShapeError("infrared_augment: expected BCHW, got " + shape_str(s));
    }
    const Shape flat{s[0], s[1], s[2] * s[3]};
    Var q = reshape(p_out, flat);
    Var k = reshape(p_inf, flat);
    // Logits are averaged over positions so that their range does not grow with image size.
    Var m = softmax_rows(scale(bmm(q, transpose_last2(k)), 1.0 / static_cast<double>(s[2] * s[3])));
    if (attention != nullptr) {
        *attention = m;
    }
    return add(reshape(bmm(m, q), s), p_out);
}

InfraredAugmentResult infrared_augment(const Tensor& p_out, const Tensor& p_inf)
{
    Tape tape;
    Var m;
    Var out = infrared_augment(tape.constant(p_out), tape.constant(p_inf), &m);
    return {out.value(), m.value()};
}

Var luminance(Var rgb)
{
    if (rgb.shape().size() != 4 || rgb.shape()[1] != 3) {
        throw ShapeError("luminance: expected B3HW, got " + shape_str(rgb.shape()));
    }
    Tape& t = rgb.tape();
    Var kernel = t.constant(Tensor({1, 3, 1, 1}, {0.299, 0.587, 0.114}));
    Var bias = t.constant(Tensor({1}));
    return conv2d(rgb, kernel, bias, 1, 0);
}

namespace {

Var two_layer(Var x, const std::array<ConvSpec, 2>& convs, double slope)
{
    return conv_lrelu(conv_lrelu(x, convs[0], slope), convs[1], slope);
}

} // namespace

Stage1Output stage1_forward(Var i_low, Var i_inf, const Stage1Net& net, const Stage1Options& opt)
{
    const Shape& s = i_low.shape();
    if (s.size() != 4 || s[1] != 3) {
        throw ShapeError("stage1_forward: expected B3HW input, got " + shape_str(s));
    }
    const Shape& si = i_inf.shape();
    if (si.size() != 4 || si[0] != s[0] || si[1] != 1 || si[2] != s[2] || si[3] != s[3]) {
        throw ShapeError("stage1_forward: infrared image " + shape_str(si) + " does not match input " + shape_str(s));
    }
    const double slope = opt.leaky_slope;
    const Ablation& ab = opt.ablation;
    Stage1Output out;

    // Shared priors, computed once and refined per component.
    std::optional<Var> lum_shared;
    if (ab.luminance_branch) {
        out.l_att_pred = la_net_forward(luminance(i_low), net.la_net, slope);
        lum_shared = two_layer(amplitude(fft2(out.l_att_pred)), net.lum_base, slope);
    }
    std::optional<Var> inf_shared;
    if (ab.infrared_branch) {
        inf_shared = two_layer(phase(fft2(i_inf)), net.inf_base, slope);
    }

    Var f = conv2d(i_low, net.entry_proj);
    for (const FourierComponent& comp : net.components) {
        const ComplexVar spec = fft2(f);
        const Var a_out = conv_lrelu(amplitude(spec), comp.amp_conv, slope);
        const Var p_out = conv_lrelu(phase(spec), comp.pha_conv, slope);

        Var a_aug = a_out;
        if (lum_shared) {
            const Var a_lum = two_layer(*lum_shared, comp.lum_refine, slope);
            a_aug = ab.luminance_augment ? luminance_augment(a_out, a_lum) : add(a_out, a_lum);
        }
        Var p_aug = p_out;
        if (inf_shared) {
            const Var p_inf = two_layer(*inf_shared, comp.inf_refine, slope);
            p_aug = ab.infrared_augment ? infrared_augment(p_out, p_inf) : add(p_out, p_inf);
        }
        f = add(ifft2(polar(a_aug, p_aug)).re, f);
    }
    out.i_s1 = add(i_low, conv2d(f, net.exit_proj));
    return out;
}

} // namespace dmfour
