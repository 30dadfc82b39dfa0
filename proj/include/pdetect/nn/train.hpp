#pragma once

#include "pdetect/data.hpp"
#include "pdetect/nn/model.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace pdetect::nn {

struct TrainConfig {
    double lr = 1e-3;
    std::size_t epochs = 20;
    std::size_t batch_size = 16;
    std::uint64_t seed = 7;
    std::optional<double> w_p;  // default: inverse class ratio of the training labels
    std::optional<double> w_n;
    std::optional<double> grad_clip;

    // Throws InvalidConfig for lr <= 0 or batch_size 0, WeightNonPositive for bad weights.
    void validate() const;
};

struct TrainResult {
    CompositeClassifier model;
    std::vector<double> loss_history;  // mean training loss of each epoch
};

// Fresh initialization from cfg.seed, then Adam over shuffled mini-batches.
TrainResult train(const Architecture& arch, std::span<const Sample> samples, std::span<const data::Label> labels,
                  const TrainConfig& cfg);

// Same loop starting from existing parameters, with a fresh optimizer state.
TrainResult continue_training(CompositeClassifier model, std::span<const Sample> samples,
                              std::span<const data::Label> labels, const TrainConfig& cfg);

// Copies base and continues training on every cluster that holds both classes, with
// class weights recomputed from that cluster's labels and seed cfg.seed + cluster id.
// Clusters without both classes are absent from the result and route to base.
std::map<std::size_t, CompositeClassifier> fine_tune_per_cluster(const CompositeClassifier& base,
                                                                 std::span<const std::size_t> assignments,
                                                                 std::size_t k, std::span<const Sample> samples,
                                                                 std::span<const data::Label> labels,
                                                                 const TrainConfig& cfg);

// Probabilities of a model over many samples.
std::vector<double> predict_all(const CompositeClassifier& model, std::span<const Sample> samples);

// Rounds every parameter to the nearest float, the precision checkpoints are stored at.
void round_to_float(CompositeClassifier& model);

}  // namespace pdetect::nn
