#pragma once

#include "dmfour/tensor.hpp"

namespace dmfour {

/// Weights of one 2D convolution: kernel (out_ch, in_ch, k, k), bias (out_ch).
struct ConvSpec {
    Tensor kernel;
    Tensor bias;
    std::size_t stride = 1;
    std::size_t padding = 0;

    std::size_t out_channels() const { return kernel.dim(0); }
    std::size_t in_channels() const { return kernel.dim(1); }
    std::size_t kernel_size() const { return kernel.dim(2); }

    /// Zero weights with "same" padding (k-1)/2.
    static ConvSpec zeros(std::size_t in_ch, std::size_t out_ch, std::size_t k, std::size_t stride = 1);
    /// 1x1 convolution copying input channel i to output channel i (requires out_ch <= in_ch or pads with zeros).
    static ConvSpec identity(std::size_t in_ch, std::size_t out_ch);
};

void validate_conv(const Shape& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
                   std::size_t padding);
Shape conv_output_shape(const Shape& input, const Tensor& kernel, std::size_t stride, std::size_t padding);

/// Zero-padded cross-correlation.
Tensor conv2d(const Tensor& input, const ConvSpec& spec);
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t padding);

// Adjoints of conv2d with respect to its three operands.
Tensor conv2d_grad_input(const Tensor& grad_out, const Tensor& kernel, const Shape& input_shape,
                         std::size_t stride, std::size_t padding);
Tensor conv2d_grad_kernel(const Tensor& grad_out, const Tensor& input, const Shape& kernel_shape,
                          std::size_t stride, std::size_t padding);
Tensor conv2d_grad_bias(const Tensor& grad_out);

Tensor leaky_relu(const Tensor& x, double slope);
Tensor sigmoid(const Tensor& x);
double sigmoid(double x);
/// Softmax along the last dimension; every row sums to one.
Tensor softmax_rows(const Tensor& x);

/// Nearest-neighbour 2x upsampling of a BCHW tensor.
Tensor upsample_nearest2x(const Tensor& x);
Tensor upsample_nearest2x_grad(const Tensor& grad_out);

} // namespace dmfour
