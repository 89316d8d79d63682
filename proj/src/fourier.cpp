#include "dmfour/fourier.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dmfour {

using cd = std::complex<double>;

namespace {

inline cd cmul(cd a, cd b)
{
    return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

std::vector<std::size_t> factorize(std::size_t n)
{
    std::vector<std::size_t> f;
    for (std::size_t p = 2; p * p <= n; ++p) {
        while (n % p == 0) {
            f.push_back(p);
            n /= p;
        }
    }
    if (n > 1) {
        f.push_back(n);
    }
    return f;
}

} // namespace

Fft1d::Fft1d(std::size_t n) : n_(n), factors_(factorize(n)), twiddles_(n)
{
    if (n == 0) {
        throw std::invalid_argument("Fft1d: zero length");
    }
    // e^{-j2pi k/n}; quarter turns are exact and the upper half mirrors the lower half.
    for (std::size_t k = 0; k <= n / 2; ++k) {
        if ((4 * k) % n == 0) {
            switch ((4 * k) / n) {
            case 0: twiddles_[k] = {1.0, 0.0}; break;
            case 1: twiddles_[k] = {0.0, -1.0}; break;
            default: twiddles_[k] = {-1.0, 0.0}; break;
            }
            continue;
        }
        const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
        twiddles_[k] = {std::cos(angle), std::sin(angle)};
    }
    for (std::size_t k = n / 2 + 1; k < n; ++k) {
        twiddles_[k] = std::conj(twiddles_[n - k]);
    }
    if ((n & (n - 1)) == 0 && n > 1) {
        bit_reverse_.resize(n);
        std::size_t bits = 0;
        while ((std::size_t{1} << bits) < n) {
            ++bits;
        }
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t r = 0;
            for (std::size_t b = 0; b < bits; ++b) {
                r |= ((i >> b) & 1) << (bits - 1 - b);
            }
            bit_reverse_[i] = r;
        }
    }
    inverse_twiddles_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        inverse_twiddles_[k] = std::conj(twiddles_[k]);
    }
}

void Fft1d::recurse(const cd* in, std::size_t in_stride, cd* out, std::size_t n, std::size_t factor_index,
                    bool inverse) const
{
    if (n == 1) {
        out[0] = in[0];
        return;
    }
    const std::size_t p = factors_[factor_index];
    const std::size_t m = n / p;
    for (std::size_t r = 0; r < p; ++r) {
        recurse(in + r * in_stride, in_stride * p, out + r * m, m, factor_index + 1, inverse);
    }
    const std::size_t step = n_ / n;
    const std::vector<cd>& tw = inverse ? inverse_twiddles_ : twiddles_;
    if (p == 2) {
        for (std::size_t k = 0; k < m; ++k) {
            const cd a = out[k];
            const cd b = cmul(out[m + k], tw[k * step]);
            out[k] = a + b;
            out[m + k] = a - b;
        }
        return;
    }
    std::vector<cd>& column = scratch_;
    column.resize(p);
    for (std::size_t k2 = 0; k2 < m; ++k2) {
        for (std::size_t r = 0; r < p; ++r) {
            column[r] = out[r * m + k2];
        }
        for (std::size_t q = 0; q < p; ++q) {
            const std::size_t k = k2 + q * m;
            cd acc = column[0];
            for (std::size_t r = 1; r < p; ++r) {
                acc += cmul(column[r], tw[(r * k * step) % n_]);
            }
            out[q * m + k2] = acc;
        }
    }
}

void Fft1d::radix2(cd* a, bool inverse) const
{
    const std::vector<cd>& tw = inverse ? inverse_twiddles_ : twiddles_;
    for (std::size_t i = 0; i < n_; ++i) {
        if (i < bit_reverse_[i]) {
            std::swap(a[i], a[bit_reverse_[i]]);
        }
    }
    for (std::size_t len = 2; len <= n_; len *= 2) {
        const std::size_t half = len / 2;
        const std::size_t step = n_ / len;
        for (std::size_t start = 0; start < n_; start += len) {
            for (std::size_t k = 0; k < half; ++k) {
                const cd u = a[start + k];
                const cd v = cmul(a[start + k + half], tw[k * step]);
                a[start + k] = u + v;
                a[start + k + half] = u - v;
            }
        }
    }
}

void Fft1d::transform(cd* data, std::size_t stride, bool inverse) const
{
    if (!bit_reverse_.empty()) {
        if (stride == 1) {
            radix2(data, inverse);
            return;
        }
        in_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            in_[i] = data[i * stride];
        }
        radix2(in_.data(), inverse);
        for (std::size_t i = 0; i < n_; ++i) {
            data[i * stride] = in_[i];
        }
        return;
    }
    in_.resize(n_);
    out_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
        in_[i] = data[i * stride];
    }
    recurse(in_.data(), 1, out_.data(), n_, 0, inverse);
    for (std::size_t i = 0; i < n_; ++i) {
        data[i * stride] = out_[i];
    }
}

namespace {

void require_image(const Tensor& t, const char* what)
{
    require_rank(t, 4, what);
    if (t.dim(2) == 0 || t.dim(3) == 0) {
        throw ShapeError(std::string(what) + ": empty spatial extent");
    }
}

ComplexField transform2d(const Tensor& re, const Tensor* im, bool inverse)
{
    require_image(re, inverse ? "ifft2" : "fft2");
    if (im != nullptr) {
        require_same_shape(re, *im, "complex field");
    }
    const std::size_t H = re.dim(2);
    const std::size_t W = re.dim(3);
    const std::size_t plane = H * W;
    const std::size_t planes = re.size() / plane;
    const Fft1d rows(W);
    const Fft1d cols(H);
    const double norm = 1.0 / std::sqrt(static_cast<double>(plane));
    ComplexField out{Tensor(re.shape()), Tensor(re.shape())};
    std::vector<cd> buf(plane);
    for (std::size_t p = 0; p < planes; ++p) {
        for (std::size_t i = 0; i < plane; ++i) {
            buf[i] = {re[p * plane + i], im != nullptr ? (*im)[p * plane + i] : 0.0};
        }
        for (std::size_t h = 0; h < H; ++h) {
            rows.transform(buf.data() + h * W, 1, inverse);
        }
        for (std::size_t w = 0; w < W; ++w) {
            cols.transform(buf.data() + w, W, inverse);
        }
        for (std::size_t i = 0; i < plane; ++i) {
            out.re[p * plane + i] = buf[i].real() * norm;
            out.im[p * plane + i] = buf[i].imag() * norm;
        }
    }
    return out;
}

} // namespace

ComplexField fft2(const Tensor& x) { return transform2d(x, nullptr, false); }
ComplexField fft2(const ComplexField& x) { return transform2d(x.re, &x.im, false); }
ComplexField ifft2(const ComplexField& x) { return transform2d(x.re, &x.im, true); }

Tensor ifft2_real(const ComplexField& x, double max_imag)
{
    ComplexField out = ifft2(x);
    const double residue = max_abs(out.im);
    if (residue > max_imag) {
        throw NumericError("ifft2: imaginary residue " + std::to_string(residue) + " exceeds " +
                           std::to_string(max_imag) + " (spectrum is not conjugate-symmetric)");
    }
    return std::move(out.re);
}

double phase_angle(double re, double im)
{
    if (re == 0.0 && im == 0.0) {
        return 0.0;
    }
    // Signed zeros would otherwise split the negative real axis between +pi and -pi.
    if (im == 0.0) {
        return re > 0.0 ? 0.0 : std::numbers::pi;
    }
    return std::atan2(im, re);
}

PolarField decompose(const ComplexField& x)
{
    require_same_shape(x.re, x.im, "decompose");
    PolarField p{Tensor(x.re.shape()), Tensor(x.re.shape())};
    for (std::size_t i = 0; i < x.re.size(); ++i) {
        p.amplitude[i] = std::hypot(x.re[i], x.im[i]);
        p.phase[i] = phase_angle(x.re[i], x.im[i]);
    }
    return p;
}

ComplexField recompose(const PolarField& p)
{
    require_same_shape(p.amplitude, p.phase, "recompose");
    ComplexField x{Tensor(p.amplitude.shape()), Tensor(p.amplitude.shape())};
    for (std::size_t i = 0; i < p.amplitude.size(); ++i) {
        const double a = p.amplitude[i];
        if (a < 0.0) {
            throw std::invalid_argument("recompose: negative amplitude " + std::to_string(a) + " at index " +
                                        std::to_string(i));
        }
        x.re[i] = a * std::cos(p.phase[i]);
        x.im[i] = a * std::sin(p.phase[i]);
    }
    return x;
}

Tensor amplitude_of(const Tensor& x) { return decompose(fft2(x)).amplitude; }
Tensor phase_of(const Tensor& x) { return decompose(fft2(x)).phase; }

SwapResult swap_components(const Tensor& x, const Tensor& y, SwapComponent which)
{
    require_same_shape(x, y, "swap_components");
    const PolarField px = decompose(fft2(x));
    const PolarField py = decompose(fft2(y));
    PolarField mixed = which == SwapComponent::amplitude ? PolarField{py.amplitude, px.phase}
                                                         : PolarField{px.amplitude, py.phase};
    Tensor raw = ifft2_real(recompose(mixed));
    Tensor image = clamp(raw, 0.0, 1.0);
    return {std::move(image), std::move(raw)};
}

Tensor quantize8(const Tensor& x, Quantization q)
{
    if (q == Quantization::none) {
        return x;
    }
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = std::clamp(x[i], 0.0, 1.0) * 255.0;
        out[i] = (q == Quantization::round8 ? std::round(v) : std::floor(v)) / 255.0;
    }
    return out;
}

std::vector<double> roundtrip_curve(const Tensor& x, std::size_t repeats, Quantization q)
{
    if (repeats == 0) {
        throw std::invalid_argument("roundtrip: repeats must be at least 1");
    }
    std::vector<double> curve;
    curve.reserve(repeats);
    Tensor current = x;
    for (std::size_t r = 0; r < repeats; ++r) {
        current = quantize8(ifft2_real(fft2(current)), q);
        curve.push_back(mean_abs_diff(current, x));
    }
    return curve;
}

double roundtrip_loss(const Tensor& x, std::size_t repeats, Quantization q)
{
    return roundtrip_curve(x, repeats, q).back();
}

// --- differentiable transforms ---------------------------------------------------------------

namespace {

// Records a transform whose value packs (re, im) as a leading axis of size 2.
Var transform_packed(Var re, const Var* im, bool inverse)
{
    ComplexField f = im != nullptr ? transform2d(re.value(), &im->value(), inverse)
                                   : transform2d(re.value(), nullptr, inverse);
    Shape packed_shape = re.value().shape();
    packed_shape.insert(packed_shape.begin(), 2);
    std::vector<double> data(f.re.vec());
    data.insert(data.end(), f.im.vec().begin(), f.im.vec().end());
    std::vector<Var> inputs{re};
    if (im != nullptr) {
        inputs.push_back(*im);
    }
    const Shape part_shape = re.value().shape();
    return re.tape().record(
        Tensor(std::move(packed_shape), std::move(data)), std::move(inputs),
        [part_shape, inverse](const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
            const std::size_t n = shape_numel(part_shape);
            Tensor gre(part_shape, std::vector<double>(g.vec().begin(), g.vec().begin() + static_cast<long>(n)));
            Tensor gim(part_shape, std::vector<double>(g.vec().begin() + static_cast<long>(n), g.vec().end()));
            // The transform is unitary and symmetric, so its adjoint is the opposite transform.
            ComplexField back = transform2d(gre, &gim, !inverse);
            if (gi[0] != nullptr) {
                for (std::size_t i = 0; i < n; ++i) {
                    (*gi[0])[i] += back.re[i];
                }
            }
            if (gi.size() > 1 && gi[1] != nullptr) {
                for (std::size_t i = 0; i < n; ++i) {
                    (*gi[1])[i] += back.im[i];
                }
            }
        });
}

Var packed_part(Var packed, std::size_t which)
{
    Shape s = packed.value().shape();
    s.erase(s.begin());
    const std::size_t n = shape_numel(s);
    const auto first = packed.value().vec().begin() + static_cast<long>(which * n);
    return packed.tape().record(Tensor(s, std::vector<double>(first, first + static_cast<long>(n))), {packed},
                                [which, n](const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
                                    for (std::size_t i = 0; i < n; ++i) {
                                        (*gi[0])[which * n + i] += g[i];
                                    }
                                });
}

ComplexVar unpack(Var packed)
{
    return {packed_part(packed, 0), packed_part(packed, 1)};
}

} // namespace

ComplexVar fft2(Var x) { return unpack(transform_packed(x, nullptr, false)); }
ComplexVar fft2(ComplexVar x) { return unpack(transform_packed(x.re, &x.im, false)); }
ComplexVar ifft2(ComplexVar x) { return unpack(transform_packed(x.re, &x.im, true)); }

Var amplitude(ComplexVar x)
{
    const Tensor& re = x.re.value();
    const Tensor& im = x.im.value();
    require_same_shape(re, im, "amplitude");
    Tensor a(re.shape());
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = std::hypot(re[i], im[i]);
    }
    return x.re.tape().record(std::move(a), {x.re, x.im},
                              [&re, &im](const Tensor& a, const Tensor& g, std::span<Tensor* const> gi) {
                                  for (std::size_t i = 0; i < g.size(); ++i) {
                                      if (a[i] == 0.0) {
                                          continue;
                                      }
                                      if (gi[0] != nullptr) {
                                          (*gi[0])[i] += g[i] * re[i] / a[i];
                                      }
                                      if (gi[1] != nullptr) {
                                          (*gi[1])[i] += g[i] * im[i] / a[i];
                                      }
                                  }
                              });
}

Var phase(ComplexVar x)
{
    const Tensor& re = x.re.value();
    const Tensor& im = x.im.value();
    require_same_shape(re, im, "phase");
    Tensor p(re.shape());
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = phase_angle(re[i], im[i]);
    }
    return x.re.tape().record(std::move(p), {x.re, x.im},
                              [&re, &im](const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
                                  for (std::size_t i = 0; i < g.size(); ++i) {
                                      const double r2 = re[i] * re[i] + im[i] * im[i];
                                      if (r2 == 0.0) {
                                          continue;
                                      }
                                      if (gi[0] != nullptr) {
                                          (*gi[0])[i] -= g[i] * im[i] / r2;
                                      }
                                      if (gi[1] != nullptr) {
                                          (*gi[1])[i] += g[i] * re[i] / r2;
                                      }
                                  }
                              });
}

ComplexVar polar(Var amp, Var ph)
{
    const Tensor& a = amp.value();
    const Tensor& p = ph.value();
    require_same_shape(a, p, "polar");
    Tensor re(a.shape());
    Tensor im(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) {
        re[i] = a[i] * std::cos(p[i]);
        im[i] = a[i] * std::sin(p[i]);
    }
    Tape& t = amp.tape();
    Var vre = t.record(std::move(re), {amp, ph}, [&a, &p](const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (gi[0] != nullptr) {
                (*gi[0])[i] += g[i] * std::cos(p[i]);
            }
            if (gi[1] != nullptr) {
                (*gi[1])[i] -= g[i] * a[i] * std::sin(p[i]);
            }
        }
    });
    Var vim = t.record(std::move(im), {amp, ph}, [&a, &p](const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (gi[0] != nullptr) {
                (*gi[0])[i] += g[i] * std::sin(p[i]);
            }
            if (gi[1] != nullptr) {
                (*gi[1])[i] += g[i] * a[i] * std::cos(p[i]);
            }
        }
    });
    return {vre, vim};
}

} // namespace dmfour
