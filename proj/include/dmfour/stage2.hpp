#pragma once

#include "dmfour/autodiff.hpp"
#include "dmfour/layers.hpp"
#include "dmfour/model_config.hpp"

#include <array>
#include <string>
#include <vector>

namespace dmfour {

inline constexpr std::size_t kDualPathBlocks = 6;
inline constexpr std::array<std::size_t, 4> kMultiScaleKernels{3, 5, 7, 9};

struct MultiScaleBlock {
    ConvSpec reduce;                  ///< C -> C/4, 1x1
    std::array<ConvSpec, 4> branches; ///< C/4 -> C/4 with kernels 3, 5, 7, 9
    ConvSpec merge;                   ///< C -> C, 1x1

    template <class Self, class F>
    static void visit(Self& self, const std::string& prefix, F&& f)
    {
        visit_conv(prefix + ".reduce", self.reduce, f);
        for (std::size_t i = 0; i < self.branches.size(); ++i) {
            visit_conv(prefix + ".k" + std::to_string(kMultiScaleKernels[i]), self.branches[i], f);
        }
        visit_conv(prefix + ".merge", self.merge, f);
    }
};

/// Fast Fourier convolution block: local 3x3 half, spectral 1x1 half, merged residually.
struct FfcBlock {
    ConvSpec local_conv;  ///< C/2 -> C/2, 3x3
    ConvSpec global_conv; ///< C -> C, 1x1 over stacked (re, im) of the global half
    ConvSpec merge;       ///< C -> C, 1x1

    template <class Self, class F>
    static void visit(Self& self, const std::string& prefix, F&& f)
    {
        visit_conv(prefix + ".local", self.local_conv, f);
        visit_conv(prefix + ".global", self.global_conv, f);
        visit_conv(prefix + ".merge", self.merge, f);
    }
};

/// Spatial and texture reconstruction stage parameters.
struct Stage2Net {
    std::array<ConvSpec, 2> encoder; ///< 3 -> C/2 -> C, both stride 2
    std::vector<MultiScaleBlock> ms_blocks;
    std::vector<FfcBlock> ffc_blocks;
    ConvSpec fuse;                   ///< 2C -> C, 1x1
    std::array<ConvSpec, 2> decoder; ///< C -> C/2 -> 3, each after nearest 2x upsampling

    static Stage2Net init(const ModelConfig& cfg, Rng& rng);

    std::size_t width() const { return fuse.out_channels(); }

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
        visit_conv("stage2.enc0", self.encoder[0], f);
        visit_conv("stage2.enc1", self.encoder[1], f);
        for (std::size_t i = 0; i < self.ms_blocks.size(); ++i) {
            MultiScaleBlock::visit(self.ms_blocks[i], "stage2.ms" + std::to_string(i), f);
        }
        for (std::size_t i = 0; i < self.ffc_blocks.size(); ++i) {
            FfcBlock::visit(self.ffc_blocks[i], "stage2.ffc" + std::to_string(i), f);
        }
        visit_conv("stage2.fuse", self.fuse, f);
        visit_conv("stage2.dec0", self.decoder[0], f);
        visit_conv("stage2.dec1", self.decoder[1], f);
    }
};

MultiScaleBlock init_multiscale_block(std::size_t channels, Rng& rng);
FfcBlock init_ffc_block(std::size_t channels, Rng& rng);

/// out = f + merge(concat_k(conv_k(r) * sigmoid(r))), r = reduce(f). C must be divisible by 4.
Var multiscale_block_forward(Var f, const MultiScaleBlock& p);

/// out = f + merge(concat(local(f_l), global(f_g))). C must be even.
/// The global path takes the real part of the inverse transform; `max_imag_residue`, when given,
/// receives the largest discarded imaginary magnitude.
Var ffc_block_forward(Var f, const FfcBlock& p, double slope, double* max_imag_residue = nullptr);

/// Intermediate values recorded by stage2_forward for inspection.
struct Stage2Trace {
    Var encoded;
    Var ms_input;
    Var ffc_input;
    Var ms_output;
    Var ffc_output;
};

struct Stage2Options {
    double leaky_slope = 0.2;
    Ablation ablation{};
};

/// Unclamped B3HW output. H and W must be divisible by 4.
Var stage2_forward(Var i_s1, const Stage2Net& net, const Stage2Options& opt, Stage2Trace* trace = nullptr);

} // namespace dmfour
