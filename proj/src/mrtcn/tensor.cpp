#include "mrtcn/tensor.hpp"

#include "mrtcn/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mrtcn {

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        n *= d;
    }
    return n;
}

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) {
            os << ", ";
        }
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
    require(std::all_of(shape_.begin(), shape_.end(), [](std::size_t d) { return d > 0; }),
            ErrorKind::InvalidArgument, "tensor dimensions must be positive, got " + shape_string(shape_));
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
    require(shape_size(shape_) == data_.size(), ErrorKind::InvalidArgument,
            "tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                shape_string(shape_));
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

void Tensor::reshape(Shape shape) {
    require(shape_size(shape) == data_.size(), ErrorKind::InvalidArgument,
            "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    shape_ = std::move(shape);
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void add_inplace(Tensor& a, const Tensor& b) {
    expect_shape(b, a.shape(), "add_inplace operand");
    double* pa = a.data();
    const double* pb = b.data();
    for (std::size_t i = 0; i < a.size(); ++i) {
        pa[i] += pb[i];
    }
}

void expect_shape(const Tensor& t, const Shape& expected, const std::string& what) {
    if (t.shape() != expected) {
        fail(ErrorKind::InvalidArgument,
             what + ": expected shape " + shape_string(expected) + ", got " + shape_string(t.shape()));
    }
}

}  // namespace mrtcn
