#pragma once

#include "dmfour/model_config.hpp"
#include "dmfour/stage1.hpp"
#include "dmfour/stage2.hpp"

#include <cstdint>

namespace dmfour {

/// Both stages plus the architecture they were built from.
struct Model {
    ModelConfig config;
    Stage1Net stage1;
    Stage2Net stage2;

    static Model init(const ModelConfig& cfg, std::uint64_t seed);

    template <class F>
    void for_each_param(F&& f)
    {
        stage1.for_each_param(f);
        stage2.for_each_param(f);
    }
    template <class F>
    void for_each_param(F&& f) const
    {
        stage1.for_each_param(f);
        stage2.for_each_param(f);
    }

    std::size_t parameter_count() const;
};

struct ForwardOutput {
    Var i_s1;
    Var i_s2;
    Var l_att_pred; ///< invalid when the luminance branch is disabled or stage 1 is skipped
};

/// Runs the enabled stages. Disabled stages pass their input through unchanged.
ForwardOutput model_forward(Var i_low, Var i_inf, const Model& model, const Ablation& ablation);

struct Enhanced {
    Tensor i_s1; ///< unclamped
    Tensor i_s2; ///< unclamped
};

/// Inference without gradient bookkeeping.
Enhanced enhance(const Model& model, const Tensor& i_low, const Tensor& i_inf, const Ablation& ablation = {});

} // namespace dmfour
