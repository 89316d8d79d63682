#pragma once

#include "dmfour/autodiff.hpp"
#include "dmfour/layers.hpp"
#include "dmfour/model_config.hpp"

#include <array>
#include <string>
#include <vector>

namespace dmfour {

inline constexpr std::size_t kFourierComponents = 6;

/// U-Net predicting the luminance attention map from the Y channel.
struct LaNetParams {
    ConvSpec stem;               ///< 1 -> w
    std::vector<ConvSpec> down;  ///< level l: w_{l-1} -> w_l, stride 2
    std::vector<ConvSpec> up;    ///< level l: w_l -> w_{l-1}, after nearest upsampling
    std::vector<ConvSpec> fuse;  ///< level l: 2 w_{l-1} -> w_{l-1}, after skip concatenation
    ConvSpec head;               ///< w -> 1, linear

    std::size_t depth() const { return down.size(); }

    template <class Self, class F>
    static void visit(Self& self, const std::string& prefix, F&& f)
    {
        visit_conv(prefix + ".stem", self.stem, f);
        for (std::size_t l = 0; l < self.down.size(); ++l) {
            visit_conv(prefix + ".down" + std::to_string(l + 1), self.down[l], f);
        }
        for (std::size_t l = 0; l < self.up.size(); ++l) {
            visit_conv(prefix + ".up" + std::to_string(l + 1), self.up[l], f);
            visit_conv(prefix + ".fuse" + std::to_string(l + 1), self.fuse[l], f);
        }
        visit_conv(prefix + ".head", self.head, f);
    }
};

struct FourierComponent {
    ConvSpec amp_conv;
    ConvSpec pha_conv;
    std::array<ConvSpec, 2> lum_refine;
    std::array<ConvSpec, 2> inf_refine;

    template <class Self, class F>
    static void visit(Self& self, const std::string& prefix, F&& f)
    {
        visit_conv(prefix + ".amp", self.amp_conv, f);
        visit_conv(prefix + ".pha", self.pha_conv, f);
        visit_conv(prefix + ".lum_refine0", self.lum_refine[0], f);
        visit_conv(prefix + ".lum_refine1", self.lum_refine[1], f);
        visit_conv(prefix + ".inf_refine0", self.inf_refine[0], f);
        visit_conv(prefix + ".inf_refine1", self.inf_refine[1], f);
    }
};

/// Fourier reconstruction stage parameters.
struct Stage1Net {
    ConvSpec entry_proj; ///< 3 -> C1, 1x1
    ConvSpec exit_proj;  ///< C1 -> 3, 1x1
    std::vector<FourierComponent> components;
    LaNetParams la_net;
    std::array<ConvSpec, 2> lum_base; ///< 1 -> C1 -> C1 on the luminance-map amplitude
    std::array<ConvSpec, 2> inf_base; ///< 1 -> C1 -> C1 on the infrared phase

    static Stage1Net init(const ModelConfig& cfg, Rng& rng);

    std::size_t width() const { return entry_proj.out_channels(); }

    template <class F>
    void for_each_param(F&& f)
    {
        visit(*this, f);
    }
    template <class F>
    void for_each_param(F&& f) const
    {
        visit(*this, f);
    }

private:
    template <class Self, class F>
    static void visit(Self& self, F&& f)
    {
        visit_conv("stage1.entry", self.entry_proj, f);
        for (std::size_t i = 0; i < self.components.size(); ++i) {
            FourierComponent::visit(self.components[i], "stage1.component" + std::to_string(i), f);
        }
        LaNetParams::visit(self.la_net, "stage1.lanet", f);
        visit_conv("stage1.lum_base0", self.lum_base[0], f);
        visit_conv("stage1.lum_base1", self.lum_base[1], f);
        visit_conv("stage1.inf_base0", self.inf_base[0], f);
        visit_conv("stage1.inf_base1", self.inf_base[1], f);
        visit_conv("stage1.exit", self.exit_proj, f);
    }
};

LaNetParams init_la_net(std::size_t depth, std::size_t width, Rng& rng);

/// Predicted (unclamped) luminance attention map, B1HW. H and W must be divisible by 2^depth.
Var la_net_forward(Var y_low, const LaNetParams& p, double slope);
/// Value-level prediction clamped to [0, clamp_max].
Tensor la_net_predict(const Tensor& y_low, const LaNetParams& p, double slope, double clamp_max);

/// a_out * sigmoid(a_lum) + a_out
Var luminance_augment(Var a_out, Var a_lum);
Tensor luminance_augment(const Tensor& a_out, const Tensor& a_lum);

struct InfraredAugmentResult {
    Tensor p_aug;
    Tensor attention; ///< (B, C, C), rows sum to one
};

/// Channel-transposed attention: M = softmax_rows(P_out P_inf^T / HW) over (C, HW) flattenings,
/// P_aug = M P_out + P_out.
Var infrared_augment(Var p_out, Var p_inf, Var* attention = nullptr);
InfraredAugmentResult infrared_augment(const Tensor& p_out, const Tensor& p_inf);

struct Stage1Options {
    double leaky_slope = 0.2;
    Ablation ablation{};
};

struct Stage1Output {
    Var i_s1;       ///< unclamped B3HW
    Var l_att_pred; ///< unclamped B1HW; invalid when the luminance branch is disabled
};

/// i_low: B3HW, i_inf: B1HW with the same spatial size.
Stage1Output stage1_forward(Var i_low, Var i_inf, const Stage1Net& net, const Stage1Options& opt);

/// Y = 0.299 R + 0.587 G + 0.114 B as a recorded 1x1 convolution.
Var luminance(Var rgb);

} // namespace dmfour
