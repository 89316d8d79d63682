#pragma once

#include "dmfour/autodiff.hpp"
#include "dmfour/conv.hpp"
#include "dmfour/rng.hpp"

#include <string>

namespace dmfour {

/// He-normal kernel scaled by `gain`, zero bias, "same" padding.
ConvSpec make_conv(Rng& rng, std::size_t in_ch, std::size_t out_ch, std::size_t k, std::size_t stride = 1,
                   double gain = 1.0);

/// 1x1 convolution initialised near the identity map (identity plus He noise scaled by `noise`).
ConvSpec make_near_identity(Rng& rng, std::size_t channels, double noise);

void zero_conv(ConvSpec& spec);

/// conv followed by LeakyReLU.
Var conv_lrelu(Var x, const ConvSpec& spec, double slope);

template <class F>
void visit_conv(const std::string& name, ConvSpec& spec, F&& f)
{
    f(name + ".weight", spec.kernel);
    f(name + ".bias", spec.bias);
}

template <class F>
void visit_conv(const std::string& name, const ConvSpec& spec, F&& f)
{
    f(name + ".weight", spec.kernel);
    f(name + ".bias", spec.bias);
}

} // namespace dmfour
