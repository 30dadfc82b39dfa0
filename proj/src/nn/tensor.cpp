#include "pdetect/nn/tensor.hpp"

#include "pdetect/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace pdetect::nn {

namespace {

std::size_t element_count(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
    if (data_.size() != element_count(shape_)) {
        throw Error(ErrorKind::ShapeMismatch, "tensor data length does not match its shape");
    }
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

MatMap Tensor::mat() {
    if (rank() == 1) return {data_.data(), 1, static_cast<Eigen::Index>(shape_[0])};
    if (rank() != 2) throw Error(ErrorKind::ShapeMismatch, "matrix view needs a rank-2 tensor");
    return {data_.data(), static_cast<Eigen::Index>(shape_[0]), static_cast<Eigen::Index>(shape_[1])};
}

ConstMatMap Tensor::mat() const {
    if (rank() == 1) return {data_.data(), 1, static_cast<Eigen::Index>(shape_[0])};
    if (rank() != 2) throw Error(ErrorKind::ShapeMismatch, "matrix view needs a rank-2 tensor");
    return {data_.data(), static_cast<Eigen::Index>(shape_[0]), static_cast<Eigen::Index>(shape_[1])};
}

}  // namespace pdetect::nn
