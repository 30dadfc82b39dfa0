#pragma once

#include "pdetect/nn/tensor.hpp"

#include <cstddef>
#include <vector>

namespace pdetect::nn {

struct Conv1dParams {
    Tensor weight;  // [c_out, c_in, k]
    Tensor bias;    // [c_out]
    bool operator==(const Conv1dParams&) const = default;
};

struct DenseParams {
    Tensor weight;  // [out, in]
    Tensor bias;    // [out]
    bool operator==(const DenseParams&) const = default;
};

// Valid (unpadded) cross-correlation: input [c_in, L] -> [c_out, (L - k) / stride + 1].
Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride = 1);

// Accumulates parameter gradients into grads; returns d(input) when want_input is set,
// otherwise an empty tensor.
Tensor conv1d_backward(const Tensor& input, const Conv1dParams& params, const Tensor& d_output,
                       Conv1dParams& grads, bool want_input, std::size_t stride = 1);

double leaky_relu(double x, double slope = 0.01);
Tensor leaky_relu(const Tensor& x, double slope = 0.01);
// d_output * f'(pre), where pre is the activation input.
Tensor leaky_relu_backward(const Tensor& pre, const Tensor& d_output, double slope = 0.01);

struct PoolResult {
    Tensor output;                    // [c, L / width]
    std::vector<std::size_t> argmax;  // flat input index feeding each output
};

// Non-overlapping max pool along the last axis of [c, L]; a trailing partial window is dropped.
PoolResult max_pool(const Tensor& input, std::size_t width = 2);
std::vector<double> max_pool(const std::vector<double>& input, std::size_t width = 2);
Tensor max_pool_backward(const Tensor& input, const PoolResult& pooled, const Tensor& d_output);

Vec dense_forward(const DenseParams& p, const Vec& x);

}  // namespace pdetect::nn
