#pragma once

#include "pdetect/data.hpp"
#include "pdetect/nn/layers.hpp"
#include "pdetect/nn/recurrent.hpp"
#include "pdetect/nn/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pdetect::nn {

struct Architecture {
    std::size_t chunk_stats = 19;   // r, LSTM input width
    std::size_t freq_bins = 41;     // CNN input length
    std::size_t peak_features = 9;
    std::size_t hidden = 32;        // per LSTM direction
    std::size_t lstm_layers = 2;
    std::size_t attention_dim = 16;
    std::size_t conv1_channels = 8;
    std::size_t conv1_kernel = 5;
    std::size_t conv2_channels = 16;
    std::size_t conv2_kernel = 10;
    std::size_t pool_width = 2;
    std::size_t cnn_out = 16;
    double leaky_slope = 0.01;

    std::size_t conv1_length() const;
    std::size_t pool1_length() const;
    std::size_t conv2_length() const;
    std::size_t pool2_length() const;
    std::size_t cnn_flat_width() const;
    std::size_t context_width() const { return 2 * hidden; }
    std::size_t fusion_width() const { return context_width() + cnn_out + peak_features; }

    // Throws ShapeMismatch when the CNN cannot be built for freq_bins.
    void validate() const;
    bool operator==(const Architecture&) const = default;
};

struct FusionParams {
    Tensor weight;  // [fusion_width]
    Tensor bias;    // [1]
    bool operator==(const FusionParams&) const = default;
};

struct CompositeClassifier {
    Architecture arch;
    Conv1dParams conv1;
    Conv1dParams conv2;
    DenseParams cnn_dense;
    std::vector<BiLstmLayerParams> rnn;
    AttentionParams attn;
    FusionParams fusion;

    struct NamedTensor {
        std::string name;
        Tensor* tensor;
    };
    struct ConstNamedTensor {
        std::string name;
        const Tensor* tensor;
    };
    std::vector<NamedTensor> parameters();
    std::vector<ConstNamedTensor> parameters() const;
    std::size_t parameter_count() const;
    bool all_finite() const;

    // All-zero parameters with the shapes implied by arch.
    static CompositeClassifier zeros(const Architecture& arch);

    bool operator==(const CompositeClassifier&) const = default;
};

// Uniform in +-1/sqrt(fan_in), deterministic given seed.
CompositeClassifier init_model(const Architecture& arch, std::uint64_t seed);

// One classifier input: chunk sequence [m, r] plus the frequency and peak vectors.
struct Sample {
    Tensor sequence;
    std::vector<double> freq;
    std::vector<double> peaks;
};

double forward(const CompositeClassifier& model, const Sample& sample);
// Also returns the attention weights over timesteps.
double forward(const CompositeClassifier& model, const Sample& sample, std::vector<double>* attention_weights);

struct ClassWeights {
    double positive = 1.0;
    double negative = 1.0;
};

// Inverse class ratio: n / n_pos and n / n_neg. Throws DegenerateLabels if a class is absent.
ClassWeights inverse_ratio_weights(std::span<const data::Label> labels);

inline constexpr double kProbabilityClip = 1e-12;

// Mean of -[w_p y ln p + w_n (1 - y) ln(1 - p)] with p clipped to [eps, 1 - eps].
double weighted_bce(std::span<const double> p, std::span<const data::Label> y, double w_p, double w_n);

struct Gradients {
    double loss = 0.0;
    std::vector<double> probabilities;
    CompositeClassifier grad;  // same layout as the model
};

// Loss and exact parameter gradients of the batch-mean weighted cross-entropy.
Gradients backward(const CompositeClassifier& model, std::span<const Sample> batch,
                   std::span<const data::Label> labels, ClassWeights weights);

struct AdamState {
    std::vector<Tensor> first;
    std::vector<Tensor> second;
    std::size_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads, AdamState& state, double lr);
void adam_step(CompositeClassifier& model, const CompositeClassifier& grad, AdamState& state, double lr);

// Rescales grad so its global L2 norm is at most max_norm. Returns the norm before scaling.
double clip_gradient(CompositeClassifier& grad, double max_norm);

}  // namespace pdetect::nn
