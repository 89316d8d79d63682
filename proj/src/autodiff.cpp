#include "dmfour/autodiff.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace dmfour {

const Tensor& Var::value() const
{
    return tape().value(id_);
}

Tape& Var::tape() const
{
    if (tape_ == nullptr) {
        throw std::logic_error("use of an unbound Var");
    }
    return *tape_;
}

Var Tape::constant(Tensor value)
{
    nodes_.push_back(Node{std::move(value), {}, {}, false});
    return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value)
{
    nodes_.push_back(Node{std::move(value), {}, {}, grad_enabled_});
    return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const Tensor& param)
{
    if (auto it = params_.find(&param); it != params_.end()) {
        return Var(this, it->second);
    }
    Var v = variable(param);
    params_.emplace(&param, v.id());
    return v;
}

std::optional<Var> Tape::find_parameter(const Tensor& param) const
{
    if (auto it = params_.find(&param); it != params_.end()) {
        return Var(const_cast<Tape*>(this), it->second);
    }
    return std::nullopt;
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn backward)
{
    Node node;
    node.value = std::move(value);
    for (const Var& in : inputs) {
        if (&in.tape() != this) {
            throw std::invalid_argument("operation mixes values from different tapes");
        }
        node.inputs.push_back(in.id());
        node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
    }
    node.requires_grad = node.requires_grad && grad_enabled_;
    if (node.requires_grad) {
        node.backward = std::move(backward);
    } else {
        node.inputs.clear();
    }
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

Adjoints Tape::backward(Var loss)
{
    if (&loss.tape() != this) {
        throw std::invalid_argument("backward: loss is not on this tape");
    }
    const Tensor& lv = value(loss.id());
    if (lv.size() != 1) {
        throw ShapeError("backward: loss must be a scalar, got shape " + shape_str(lv.shape()));
    }
    std::vector<Tensor> grads(nodes_.size());
    grads[loss.id()] = Tensor(lv.shape(), 1.0);
    std::vector<Tensor*> grad_in;
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
        Node& node = nodes_[id];
        if (grads[id].empty() || !node.backward) {
            continue;
        }
        grad_in.assign(node.inputs.size(), nullptr);
        for (std::size_t k = 0; k < node.inputs.size(); ++k) {
            const std::size_t in = node.inputs[k];
            if (!nodes_[in].requires_grad) {
                continue;
            }
            if (grads[in].empty()) {
                grads[in] = Tensor(nodes_[in].value.shape());
            }
            grad_in[k] = &grads[in];
        }
        node.backward(node.value, grads[id], grad_in);
        // Only leaf adjoints are reported; interior ones are released as soon as they are consumed.
        grads[id] = Tensor();
    }
    return Adjoints(this, std::move(grads));
}

Tensor Adjoints::of(Var v) const
{
    if (&v.tape() != tape_ || v.id() >= grads_.size()) {
        throw std::invalid_argument("adjoint requested for a value not on the differentiated tape");
    }
    if (!tape_->is_leaf(v.id())) {
        throw std::invalid_argument("adjoints are retained for leaves only");
    }
    if (grads_[v.id()].empty()) {
        return Tensor(v.value().shape());
    }
    return grads_[v.id()];
}

Tensor Adjoints::of_parameter(const Tensor& param) const
{
    if (auto v = tape_->find_parameter(param)) {
        return of(*v);
    }
    return Tensor(param.shape());
}

namespace {

void accumulate(Tensor* dst, const Tensor& src)
{
    if (dst == nullptr) {
        return;
    }
    auto d = dst->data();
    auto s = src.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] += s[i];
    }
}

Tape& same_tape(Var a, Var b)
{
    if (&a.tape() != &b.tape()) {
        throw std::invalid_argument("operation mixes values from different tapes");
    }
    return a.tape();
}

} // namespace

Var add(Var a, Var b)
{
    Tape& t = same_tape(a, b);
    return t.record(add(a.value(), b.value()), {a, b}, [](const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
        accumulate(gi[0], g);
        accumulate(gi[1], g);
    });
}

Var sub(Var a, Var b)
{
    Tape& t = same_tape(a, b);
    return t.record(sub(a.value(), b.value()), {a, b}, [](const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
        accumulate(gi[0], g);
        if (gi[1] != nullptr) {
            auto d = gi[1]->data();
            for (std::size_t i = 0; i < d.size(); ++i) {
                d[i] -= g[i];
            }
        }
    });
}

Var mul(Var a, Var b)
{
    Tape& t = same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    return t.record(mul(av, bv), {a, b}, [&av, &bv](const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
        if (gi[0] != nullptr) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                (*gi[0])[i] += g[i] * bv[i];
            }
        }
        if (gi[1] != nullptr) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                (*gi[1])[i] += g[i] * av[i];
            }
        }
    });
}

Var scale(Var a, double s)
{
    return a.tape().record(scale(a.value(), s), {a}, [s](const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            (*gi[0])[i] += s * g[i];
        }
    });
}

Var leaky_relu(Var x, double slope)
{
    const Tensor& xv = x.value();
    return x.tape().record(leaky_relu(xv, slope), {x},
                           [&xv, slope](const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
                               for (std::size_t i = 0; i < g.size(); ++i) {
                                   (*gi[0])[i] += xv[i] >= 0.0 ? g[i] : slope * g[i];
                               }
                           });
}

Var sigmoid(Var x)
{
    return x.tape().record(sigmoid(x.value()), {x}, [](const Tensor& y, const Tensor& g, std::span<Tensor* const> gi) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            (*gi[0])[i] += g[i] * y[i] * (1.0 - y[i]);
        }
    });
}

Var softmax_rows(Var x)
{
    return x.tape().record(softmax_rows(x.value()), {x}, [](const Tensor& y, const Tensor& g, std::span<Tensor* const> gi) {
        const std::size_t n = y.shape().back();
        for (std::size_t row = 0; row < y.size() / n; ++row) {
            const double* yr = &y[row * n];
            const double* gr = &g[row * n];
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                dot += gr[j] * yr[j];
            }
            for (std::size_t j = 0; j < n; ++j) {
                (*gi[0])[row * n + j] += yr[j] * (gr[j] - dot);
            }
        }
    });
}

Var conv2d(Var x, Var kernel, Var bias, std::size_t stride, std::size_t padding)
{
    Tape& t = same_tape(x, kernel);
    same_tape(x, bias);
    const Tensor& xv = x.value();
    const Tensor& kv = kernel.value();
    return t.record(conv2d(xv, kv, bias.value(), stride, padding), {x, kernel, bias},
                    [&xv, &kv, stride, padding](const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
                        if (gi[0] != nullptr) {
                            accumulate(gi[0], conv2d_grad_input(g, kv, xv.shape(), stride, padding));
                        }
                        if (gi[1] != nullptr) {
                            accumulate(gi[1], conv2d_grad_kernel(g, xv, kv.shape(), stride, padding));
                        }
                        if (gi[2] != nullptr) {
                            accumulate(gi[2], conv2d_grad_bias(g));
                        }
                    });
}

Var conv2d(Var x, const ConvSpec& spec)
{
    Tape& t = x.tape();
    return conv2d(x, t.parameter(spec.kernel), t.parameter(spec.bias), spec.stride, spec.padding);
}

Var concat_channels(std::span<const Var> parts)
{
    if (parts.empty()) {
        throw ShapeError("concat_channels: no inputs");
    }
    std::vector<Tensor> values;
    std::vector<std::size_t> widths;
    for (const Var& p : parts) {
        values.push_back(p.value());
        widths.push_back(p.value().rank() == 4 ? p.value().dim(1) : 0);
    }
    Tensor out = concat_channels(std::span<const Tensor>(values));
    return parts.front().tape().record(
        std::move(out), std::vector<Var>(parts.begin(), parts.end()),
        [widths](const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
            std::size_t offset = 0;
            for (std::size_t k = 0; k < widths.size(); ++k) {
                if (gi[k] != nullptr) {
                    accumulate(gi[k], slice_channels(g, offset, widths[k]));
                }
                offset += widths[k];
            }
        });
}

Var slice_channels(Var x, std::size_t first, std::size_t count)
{
    const Shape in_shape = x.value().shape();
    return x.tape().record(slice_channels(x.value(), first, count), {x},
                           [in_shape, first, count](const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
                               const std::size_t C = in_shape[1];
                               const std::size_t plane = in_shape[2] * in_shape[3];
                               for (std::size_t b = 0; b < in_shape[0]; ++b) {
                                   for (std::size_t k = 0; k < count * plane; ++k) {
                                       (*gi[0])[(b * C + first) * plane + k] += g[b * count * plane + k];
                                   }
                               }
                           });
}

Var upsample_nearest2x(Var x)
{
    return x.tape().record(upsample_nearest2x(x.value()), {x},
                           [](const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
                               accumulate(gi[0], upsample_nearest2x_grad(g));
                           });
}

Var reshape(Var x, Shape shape)
{
    return x.tape().record(x.value().reshaped(std::move(shape)), {x},
                           [](const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
                               auto d = gi[0]->data();
                               for (std::size_t i = 0; i < d.size(); ++i) {
                                   d[i] += g[i];
                               }
                           });
}

namespace {

Tensor transpose_last2(const Tensor& x)
{
    require_rank(x, 3, "transpose_last2");
    const std::size_t B = x.dim(0);
    const std::size_t M = x.dim(1);
    const std::size_t N = x.dim(2);
    Tensor out({B, N, M});
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t i = 0; i < M; ++i) {
            for (std::size_t j = 0; j < N; ++j) {
                out[(b * N + j) * M + i] = x[(b * M + i) * N + j];
            }
        }
    }
    return out;
}

// out[b] (+)= op(a[b]) * op(c[b]) with optional transposes; shapes are given after transposition.
void gemm_accumulate(const Tensor& a, bool trans_a, const Tensor& c, bool trans_c, Tensor& out)
{
    const std::size_t B = out.dim(0);
    const std::size_t M = out.dim(1);
    const std::size_t N = out.dim(2);
    const std::size_t K = trans_a ? a.dim(1) : a.dim(2);
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t i = 0; i < M; ++i) {
            for (std::size_t k = 0; k < K; ++k) {
                const double av = trans_a ? a[(b * K + k) * M + i] : a[(b * M + i) * K + k];
                if (av == 0.0) {
                    continue;
                }
                double* dst = &out[(b * M + i) * N];
                if (trans_c) {
                    for (std::size_t j = 0; j < N; ++j) {
                        dst[j] += av * c[(b * N + j) * K + k];
                    }
                } else {
                    const double* src = &c[(b * K + k) * N];
                    for (std::size_t j = 0; j < N; ++j) {
                        dst[j] += av * src[j];
                    }
                }
            }
        }
    }
}

} // namespace

Var transpose_last2(Var x)
{
    return x.tape().record(transpose_last2(x.value()), {x}, [](const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
        accumulate(gi[0], transpose_last2(g));
    });
}

Var bmm(Var a, Var b)
{
    Tape& t = same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    require_rank(av, 3, "bmm");
    require_rank(bv, 3, "bmm");
    if (av.dim(0) != bv.dim(0) || av.dim(2) != bv.dim(1)) {
        throw ShapeError("bmm: incompatible shapes " + shape_str(av.shape()) + " x " + shape_str(bv.shape()));
    }
    Tensor out({av.dim(0), av.dim(1), bv.dim(2)});
    gemm_accumulate(av, false, bv, false, out);
    return t.record(std::move(out), {a, b}, [&av, &bv](const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
        if (gi[0] != nullptr) {
            gemm_accumulate(g, false, bv, true, *gi[0]); // dA = G B^T
        }
        if (gi[1] != nullptr) {
            gemm_accumulate(av, true, g, false, *gi[1]); // dB = A^T G
        }
    });
}

Var sum(Var x)
{
    return x.tape().record(Tensor::scalar(sum(x.value())), {x}, [](const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
        const double s = g[0];
        for (double& v : gi[0]->data()) {
            v += s;
        }
    });
}

Var mean(Var x)
{
    const double n = static_cast<double>(x.value().size());
    return x.tape().record(Tensor::scalar(mean(x.value())), {x}, [n](const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
        const double s = g[0] / n;
        for (double& v : gi[0]->data()) {
            v += s;
        }
    });
}

Var mse(Var a, Var b)
{
    Tape& t = same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    require_same_shape(av, bv, "mse");
    const double n = static_cast<double>(av.size());
    return t.record(Tensor::scalar(mean_sq_diff(av, bv)), {a, b},
                    [&av, &bv, n](const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
                        const double s = 2.0 * g[0] / n;
                        for (std::size_t i = 0; i < av.size(); ++i) {
                            const double d = s * (av[i] - bv[i]);
                            if (gi[0] != nullptr) {
                                (*gi[0])[i] += d;
                            }
                            if (gi[1] != nullptr) {
                                (*gi[1])[i] -= d;
                            }
                        }
                    });
}

namespace {

constexpr std::array<double, 5> kBinomial{1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

// Source index of tap k for coarse sample o along an axis of length n (replicate borders).
std::size_t tap_index(std::size_t o, std::size_t k, std::size_t n)
{
    const long i = static_cast<long>(2 * o + k) - 2;
    return static_cast<std::size_t>(std::clamp<long>(i, 0, static_cast<long>(n) - 1));
}

// Blur + decimate along one strided axis: fine (length n) -> coarse (length (n+1)/2).
void decimate_axis(const double* fine, double* coarse, std::size_t n, std::size_t stride)
{
    for (std::size_t o = 0; o < (n + 1) / 2; ++o) {
        for (std::size_t k = 0; k < kBinomial.size(); ++k) {
            coarse[o * stride] += kBinomial[k] * fine[tap_index(o, k, n) * stride];
        }
    }
}

// Adjoint of decimate_axis: scatters coarse values back onto the fine axis.
void decimate_axis_adjoint(const double* coarse, double* fine, std::size_t n, std::size_t stride)
{
    for (std::size_t o = 0; o < (n + 1) / 2; ++o) {
        for (std::size_t k = 0; k < kBinomial.size(); ++k) {
            fine[tap_index(o, k, n) * stride] += kBinomial[k] * coarse[o * stride];
        }
    }
}

Tensor pyramid_adjoint(const Tensor& coarse, const Shape& fine_shape)
{
    const std::size_t BC = fine_shape[0] * fine_shape[1];
    const std::size_t H = fine_shape[2];
    const std::size_t W = fine_shape[3];
    const std::size_t Ho = (H + 1) / 2;
    const std::size_t Wo = (W + 1) / 2;
    Tensor rows({BC, 1, H, Wo});
    Tensor fine(fine_shape);
    for (std::size_t p = 0; p < BC; ++p) {
        for (std::size_t c = 0; c < Wo; ++c) {
            decimate_axis_adjoint(&coarse[p * Ho * Wo + c], &rows[p * H * Wo + c], H, Wo);
        }
        for (std::size_t y = 0; y < H; ++y) {
            decimate_axis_adjoint(&rows[(p * H + y) * Wo], &fine[(p * H + y) * W], W, 1);
        }
    }
    return fine;
}

} // namespace

Tensor pyramid_down(const Tensor& x)
{
    require_rank(x, 4, "pyramid_down");
    const std::size_t BC = x.dim(0) * x.dim(1);
    const std::size_t H = x.dim(2);
    const std::size_t W = x.dim(3);
    const std::size_t Ho = (H + 1) / 2;
    const std::size_t Wo = (W + 1) / 2;
    Tensor rows({BC, 1, H, Wo});
    Tensor out({x.dim(0), x.dim(1), Ho, Wo});
    for (std::size_t p = 0; p < BC; ++p) {
        for (std::size_t y = 0; y < H; ++y) {
            decimate_axis(&x[(p * H + y) * W], &rows[(p * H + y) * Wo], W, 1);
        }
        for (std::size_t c = 0; c < Wo; ++c) {
            decimate_axis(&rows[p * H * Wo + c], &out[p * Ho * Wo + c], H, Wo);
        }
    }
    return out;
}

Var pyramid_down(Var x)
{
    const Shape fine = x.value().shape();
    return x.tape().record(pyramid_down(x.value()), {x}, [fine](const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
        accumulate(gi[0], pyramid_adjoint(g, fine));
    });
}

double gradient_relative_error(const Tensor& analytic, const Tensor& numeric, double floor)
{
    return max_abs_diff(analytic, numeric) / std::max(max_abs(numeric), floor);
}

} // namespace dmfour
