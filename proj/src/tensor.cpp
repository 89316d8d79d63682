#include "dmfour/tensor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace dmfour {

std::size_t shape_numel(const Shape& shape)
{
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape)
{
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        os << (i ? ", " : "") << shape[i];
    }
    os << ')';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill)
{
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data))
{
    if (data_.size() != shape_numel(shape_)) {
        throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str(shape_));
    }
}

std::size_t Tensor::dim(std::size_t axis) const
{
    if (axis >= shape_.size()) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(shape_));
    }
    return shape_[axis];
}

double& Tensor::at(std::size_t b, std::size_t c, std::size_t h, std::size_t w)
{
    return data_[((b * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

double Tensor::at(std::size_t b, std::size_t c, std::size_t h, std::size_t w) const
{
    return data_[((b * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

double Tensor::item() const
{
    if (data_.size() != 1) {
        throw ShapeError("item() on tensor of shape " + shape_str(shape_));
    }
    return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const
{
    if (shape_numel(shape) != data_.size()) {
        throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    }
    return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const noexcept
{
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what)
{
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
}

void require_rank(const Tensor& t, std::size_t rank, const char* what)
{
    if (t.rank() != rank) {
        throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got shape " +
                         shape_str(t.shape()));
    }
}

namespace {

template <class F>
Tensor zip(const Tensor& a, const Tensor& b, const char* what, F f)
{
    require_same_shape(a, b, what);
    Tensor out(a.shape());
    auto da = a.data();
    auto db = b.data();
    auto o = out.data();
    for (std::size_t i = 0; i < o.size(); ++i) {
        o[i] = f(da[i], db[i]);
    }
    return out;
}

template <class F>
Tensor map(const Tensor& a, F f)
{
    Tensor out(a.shape());
    auto da = a.data();
    auto o = out.data();
    for (std::size_t i = 0; i < o.size(); ++i) {
        o[i] = f(da[i]);
    }
    return out;
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) { return zip(a, b, "add", std::plus<>()); }
Tensor sub(const Tensor& a, const Tensor& b) { return zip(a, b, "sub", std::minus<>()); }
Tensor mul(const Tensor& a, const Tensor& b) { return zip(a, b, "mul", std::multiplies<>()); }
Tensor scale(const Tensor& a, double s) { return map(a, [s](double v) { return v * s; }); }
Tensor add_scalar(const Tensor& a, double s) { return map(a, [s](double v) { return v + s; }); }
Tensor clamp(const Tensor& a, double lo, double hi)
{
    return map(a, [lo, hi](double v) { return std::clamp(v, lo, hi); });
}

double sum(const Tensor& a)
{
    double s = 0.0;
    for (double v : a.data()) {
        s += v;
    }
    return s;
}

double mean(const Tensor& a)
{
    if (a.empty()) {
        throw ShapeError("mean of empty tensor");
    }
    return sum(a) / static_cast<double>(a.size());
}

double max_abs(const Tensor& a)
{
    double m = 0.0;
    for (double v : a.data()) {
        m = std::max(m, std::abs(v));
    }
    return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b)
{
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

double mean_abs_diff(const Tensor& a, const Tensor& b)
{
    require_same_shape(a, b, "mean_abs_diff");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += std::abs(a[i] - b[i]);
    }
    return s / static_cast<double>(a.size());
}

double mean_sq_diff(const Tensor& a, const Tensor& b)
{
    require_same_shape(a, b, "mean_sq_diff");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s / static_cast<double>(a.size());
}

Tensor slice_channels(const Tensor& x, std::size_t first, std::size_t count)
{
    require_rank(x, 4, "slice_channels");
    const auto [B, C, H, W] = std::array{x.dim(0), x.dim(1), x.dim(2), x.dim(3)};
    if (first + count > C) {
        throw ShapeError("slice_channels: range [" + std::to_string(first) + ", " +
                         std::to_string(first + count) + ") exceeds " + std::to_string(C) + " channels");
    }
    Tensor out({B, count, H, W});
    const std::size_t plane = H * W;
    for (std::size_t b = 0; b < B; ++b) {
        std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>((b * C + first) * plane), count * plane,
                    out.data().begin() + static_cast<std::ptrdiff_t>(b * count * plane));
    }
    return out;
}

Tensor concat_channels(std::span<const Tensor> parts)
{
    if (parts.empty()) {
        throw ShapeError("concat_channels: no inputs");
    }
    const Tensor& first = parts.front();
    require_rank(first, 4, "concat_channels");
    std::size_t total = 0;
    for (const Tensor& p : parts) {
        require_rank(p, 4, "concat_channels");
        if (p.dim(0) != first.dim(0) || p.dim(2) != first.dim(2) || p.dim(3) != first.dim(3)) {
            throw ShapeError("concat_channels: incompatible shapes " + shape_str(first.shape()) + " and " +
                             shape_str(p.shape()));
        }
        total += p.dim(1);
    }
    const std::size_t B = first.dim(0);
    const std::size_t plane = first.dim(2) * first.dim(3);
    Tensor out({B, total, first.dim(2), first.dim(3)});
    for (std::size_t b = 0; b < B; ++b) {
        std::size_t offset = 0;
        for (const Tensor& p : parts) {
            const std::size_t n = p.dim(1) * plane;
            std::copy_n(p.data().begin() + static_cast<std::ptrdiff_t>(b * n), n,
                        out.data().begin() + static_cast<std::ptrdiff_t>((b * total + offset) * plane));
            offset += p.dim(1);
        }
    }
    return out;
}

Tensor batch_item(const Tensor& x, std::size_t index)
{
    if (x.rank() == 0 || index >= x.dim(0)) {
        throw ShapeError("batch_item: index out of range for " + shape_str(x.shape()));
    }
    Shape s = x.shape();
    const std::size_t n = x.size() / s[0];
    s[0] = 1;
    return Tensor(s, std::vector<double>(x.data().begin() + static_cast<std::ptrdiff_t>(index * n),
                                         x.data().begin() + static_cast<std::ptrdiff_t>((index + 1) * n)));
}

Tensor stack_batch(std::span<const Tensor> items)
{
    if (items.empty()) {
        throw ShapeError("stack_batch: no inputs");
    }
    Shape s = items.front().shape();
    if (s.empty() || s[0] != 1) {
        throw ShapeError("stack_batch: items must have a leading batch dimension of 1");
    }
    std::vector<double> data;
    data.reserve(items.size() * items.front().size());
    for (const Tensor& t : items) {
        require_same_shape(t, items.front(), "stack_batch");
        data.insert(data.end(), t.data().begin(), t.data().end());
    }
    s[0] = items.size();
    return Tensor(s, std::move(data));
}

} // namespace dmfour
