#pragma once

#include "dmfour/conv.hpp"
#include "dmfour/tensor.hpp"

#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace dmfour {

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    std::size_t id() const { return id_; }
    Tape& tape() const;
    bool valid() const { return tape_ != nullptr; }

private:
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Accumulates `grad_out` (the adjoint of the node's `value`) into the adjoints of its inputs.
/// Entries of `grad_in` are null for inputs that do not require gradients.
using BackwardFn =
    std::function<void(const Tensor& value, const Tensor& grad_out, std::span<Tensor* const> grad_in)>;

class Adjoints;

/// Append-only record of primitive operations for reverse-mode differentiation.
/// A tape is single-writer; values and backward closures live as long as the tape.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf that never receives an adjoint.
    Var constant(Tensor value);
    /// Leaf that receives an adjoint.
    Var variable(Tensor value);
    /// Leaf bound to a model parameter; repeated calls with the same tensor return the same handle.
    Var parameter(const Tensor& param);
    std::optional<Var> find_parameter(const Tensor& param) const;

    Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);

    /// Reverse accumulation from a scalar loss.
    Adjoints backward(Var loss);

    const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
    bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
    bool is_leaf(std::size_t id) const { return nodes_.at(id).inputs.empty(); }
    std::size_t size() const { return nodes_.size(); }

    /// When disabled, recorded nodes carry no backward closures (inference mode).
    void set_grad_enabled(bool enabled) { grad_enabled_ = enabled; }
    bool grad_enabled() const { return grad_enabled_; }

private:
    struct Node {
        Tensor value;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
        bool requires_grad = false;
    };

    std::deque<Node> nodes_;
    std::unordered_map<const Tensor*, std::size_t> params_;
    bool grad_enabled_ = true;
};

/// Adjoints of the leaves (constants excluded) reachable from a loss.
class Adjoints {
public:
    Adjoints(const Tape* tape, std::vector<Tensor> grads) : tape_(tape), grads_(std::move(grads)) {}

    /// Adjoint of the leaf `v`; zeros when `v` does not influence the loss. Throws for interior nodes.
    Tensor of(Var v) const;
    /// Adjoint of a parameter bound with Tape::parameter; zeros if it was never bound.
    Tensor of_parameter(const Tensor& param) const;

private:
    const Tape* tape_;
    std::vector<Tensor> grads_;
};

// Differentiable primitives. All inputs must live on the same tape.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var leaky_relu(Var x, double slope);
Var sigmoid(Var x);
Var softmax_rows(Var x);
Var conv2d(Var x, Var kernel, Var bias, std::size_t stride, std::size_t padding);
/// Convolution whose kernel and bias are bound as tape parameters.
Var conv2d(Var x, const ConvSpec& spec);
Var concat_channels(std::span<const Var> parts);
Var slice_channels(Var x, std::size_t first, std::size_t count);
Var upsample_nearest2x(Var x);
Var reshape(Var x, Shape shape);
/// Swaps the last two axes of a rank-3 tensor.
Var transpose_last2(Var x);
/// Batched matrix product (B, M, K) x (B, K, N) -> (B, M, N).
Var bmm(Var a, Var b);
Var sum(Var x);
Var mean(Var x);
/// Mean squared error, a scalar.
Var mse(Var a, Var b);
/// 5-tap binomial blur with replicated borders followed by 2x decimation (one Gaussian pyramid level).
Var pyramid_down(Var x);
Tensor pyramid_down(const Tensor& x);

/// Relative error used for gradient checks: max |analytic - numeric| / max(max |numeric|, floor).
double gradient_relative_error(const Tensor& analytic, const Tensor& numeric, double floor = 1e-8);

} // namespace dmfour
