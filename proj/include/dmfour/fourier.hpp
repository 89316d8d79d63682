#pragma once

#include "dmfour/autodiff.hpp"
#include "dmfour/tensor.hpp"

#include <complex>
#include <vector>

namespace dmfour {

/// Per-channel 2D spectrum: real and imaginary parts, both BCHW.
struct ComplexField {
    Tensor re;
    Tensor im;
};

/// Polar form of a spectrum. Amplitude is non-negative, phase lies in (-pi, pi].
struct PolarField {
    Tensor amplitude;
    Tensor phase;
};

/// In-place 1D DFT of arbitrary length (mixed radix; prime factors handled by direct sums).
/// Unnormalized: forward uses e^{-j2pi nk/N}, inverse e^{+j2pi nk/N}.
class Fft1d {
public:
    explicit Fft1d(std::size_t n);

    std::size_t size() const { return n_; }
    void transform(std::complex<double>* data, std::size_t stride, bool inverse) const;

private:
    void recurse(const std::complex<double>* in, std::size_t in_stride, std::complex<double>* out,
                 std::size_t n, std::size_t factor_index, bool inverse) const;
    /// In-place iterative transform for power-of-two lengths.
    void radix2(std::complex<double>* data, bool inverse) const;

    std::size_t n_;
    std::vector<std::size_t> factors_;
    std::vector<std::complex<double>> twiddles_;
    std::vector<std::complex<double>> inverse_twiddles_;
    std::vector<std::size_t> bit_reverse_; ///< empty unless n is a power of two
    // Working buffers; an Fft1d instance is not shared between threads.
    mutable std::vector<std::complex<double>> in_, out_, scratch_;
};

/// Orthonormal 2D DFT over the last two axes of a BCHW tensor (scale 1/sqrt(HW) both ways).
ComplexField fft2(const Tensor& x);
ComplexField fft2(const ComplexField& x);
ComplexField ifft2(const ComplexField& x);

/// Inverse transform of a spectrum expected to be conjugate-symmetric.
/// Throws NumericError when the imaginary residue exceeds `max_imag`.
Tensor ifft2_real(const ComplexField& x, double max_imag = 1e-6);

PolarField decompose(const ComplexField& x);
/// Throws std::invalid_argument on negative amplitude.
ComplexField recompose(const PolarField& p);

double phase_angle(double re, double im);

Tensor amplitude_of(const Tensor& x);
Tensor phase_of(const Tensor& x);

enum class SwapComponent { amplitude, phase };

struct SwapResult {
    Tensor image;     ///< clamped to [0, 1] for emission
    Tensor unclamped; ///< raw inverse transform for measurement
};

/// amplitude: |F(y)| with the phase of x. phase: |F(x)| with the phase of y.
SwapResult swap_components(const Tensor& x, const Tensor& y, SwapComponent which);

enum class Quantization { none, round8, floor8 };

/// MAE against `x` after each of `repeats` forward/inverse round trips,
/// optionally re-quantizing to 8 bits between trips.
std::vector<double> roundtrip_curve(const Tensor& x, std::size_t repeats, Quantization q = Quantization::none);
double roundtrip_loss(const Tensor& x, std::size_t repeats, Quantization q = Quantization::none);

Tensor quantize8(const Tensor& x, Quantization q);

// Differentiable counterparts.
struct ComplexVar {
    Var re;
    Var im;
};

ComplexVar fft2(Var x);
ComplexVar fft2(ComplexVar x);
ComplexVar ifft2(ComplexVar x);
Var amplitude(ComplexVar x);
Var phase(ComplexVar x);
ComplexVar polar(Var amplitude, Var phase);

} // namespace dmfour
