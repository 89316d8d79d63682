#include "dmfour/layers.hpp"

#include <cmath>

namespace dmfour {

ConvSpec make_conv(Rng& rng, std::size_t in_ch, std::size_t out_ch, std::size_t k, std::size_t stride, double gain)
{
    ConvSpec spec = ConvSpec::zeros(in_ch, out_ch, k, stride);
    const double std_dev = gain * std::sqrt(2.0 / static_cast<double>(in_ch * k * k));
    for (double& w : spec.kernel.data()) {
        w = std_dev * rng.normal();
    }
    return spec;
}

ConvSpec make_near_identity(Rng& rng, std::size_t channels, double noise)
{
    ConvSpec spec = make_conv(rng, channels, channels, 1, 1, noise);
    for (std::size_t c = 0; c < channels; ++c) {
        spec.kernel[c * channels + c] += 1.0;
    }
    return spec;
}

void zero_conv(ConvSpec& spec)
{
    for (double& w : spec.kernel.data()) {
        w = 0.0;
    }
    for (double& b : spec.bias.data()) {
        b = 0.0;
    }
}

Var conv_lrelu(Var x, const ConvSpec& spec, double slope)
{
    return leaky_relu(conv2d(x, spec), slope);
}

} // namespace dmfour
