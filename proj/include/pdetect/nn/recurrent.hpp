#pragma once

#include "pdetect/nn/tensor.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace pdetect::nn {

// Gate rows are stacked as [input, forget, cell, output].
struct LstmDirectionParams {
    Tensor w_input;   // [4h, in]
    Tensor w_hidden;  // [4h, h]
    Tensor bias;      // [4h]
    bool operator==(const LstmDirectionParams&) const = default;
};

struct BiLstmLayerParams {
    LstmDirectionParams forward;
    LstmDirectionParams backward;
    bool operator==(const BiLstmLayerParams&) const = default;
};

// Activations kept for backpropagation through time, indexed by timestep.
struct LstmDirectionTrace {
    Mat gates;  // [m, 4h] post-activation
    Mat cell;   // [m, h]
    Mat cell_tanh;
    Mat hidden;
};

struct BiLstmTrace {
    std::vector<Mat> layer_inputs;  // input to each layer, [m, in]
    std::vector<LstmDirectionTrace> forward;
    std::vector<LstmDirectionTrace> backward;
};

// Stacked bidirectional LSTM over a [m, r] sequence; returns [m, 2h], forward half first.
Tensor bilstm_forward(std::span<const BiLstmLayerParams> layers, const Tensor& sequence, BiLstmTrace* trace = nullptr);

// Accumulates into grads (same layout as layers); returns d(sequence).
Tensor bilstm_backward(std::span<const BiLstmLayerParams> layers, const BiLstmTrace& trace, const Tensor& d_output,
                       std::span<BiLstmLayerParams> grads);

struct AttentionParams {
    Tensor proj;   // [a, 2h]
    Tensor bias;   // [a]
    Tensor score;  // [a]
    bool operator==(const AttentionParams&) const = default;
};

struct AttentionResult {
    Tensor context;  // [2h]
    Tensor weights;  // [m], softmax over timesteps
    Mat activation;  // [m, a] = tanh(hidden proj^T + bias)
};

// score_t = v . tanh(A h_t + b), weights = softmax(score), context = sum_t weights_t h_t.
AttentionResult attention(const Tensor& hidden, const AttentionParams& params);

// Accumulates into grads; returns d(hidden).
Tensor attention_backward(const Tensor& hidden, const AttentionParams& params, const AttentionResult& forward,
                          std::span<const double> d_context, AttentionParams& grads);

}  // namespace pdetect::nn
