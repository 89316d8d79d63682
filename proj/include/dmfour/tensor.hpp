#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dmfour {

/// Raised when operand shapes are incompatible with an operation.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a computation produces or receives non-finite values.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array of doubles. Images are laid out as (batch, channel, height, width).
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
    static Tensor ones(Shape shape) { return Tensor(std::move(shape), 1.0); }
    static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    const std::vector<double>& vec() const noexcept { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    const double& operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t b, std::size_t c, std::size_t h, std::size_t w);
    double at(std::size_t b, std::size_t c, std::size_t h, std::size_t w) const;

    /// Scalar value of a tensor holding exactly one element.
    double item() const;

    Tensor reshaped(Shape shape) const;

    bool all_finite() const noexcept;

    friend bool operator==(const Tensor& a, const Tensor& b) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

void require_same_shape(const Tensor& a, const Tensor& b, const char* what);
void require_rank(const Tensor& t, std::size_t rank, const char* what);

// Value-level elementwise helpers (no differentiation).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor clamp(const Tensor& a, double lo, double hi);

double sum(const Tensor& a);
double mean(const Tensor& a);
double max_abs(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);
double mean_abs_diff(const Tensor& a, const Tensor& b);
double mean_sq_diff(const Tensor& a, const Tensor& b);

/// Channels [first, first+count) of a BCHW tensor.
Tensor slice_channels(const Tensor& x, std::size_t first, std::size_t count);
Tensor concat_channels(std::span<const Tensor> parts);
/// Batch item `index` of a B... tensor, keeping a leading batch dimension of 1.
Tensor batch_item(const Tensor& x, std::size_t index);
Tensor stack_batch(std::span<const Tensor> items);

} // namespace dmfour
