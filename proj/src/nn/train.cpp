#include "pdetect/nn/train.hpp"

#include "pdetect/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace pdetect::nn {

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw Error(ErrorKind::InvalidConfig, "learning rate must be positive");
    if (batch_size == 0) throw Error(ErrorKind::InvalidConfig, "batch size must be at least 1");
    if ((w_p && !(*w_p > 0.0)) || (w_n && !(*w_n > 0.0))) {
        throw Error(ErrorKind::WeightNonPositive, "class weights must be positive");
    }
    if (grad_clip && !(*grad_clip > 0.0)) throw Error(ErrorKind::InvalidConfig, "gradient clip must be positive");
}

namespace {

ClassWeights resolve_weights(std::span<const data::Label> labels, const TrainConfig& cfg) {
    const auto derived = inverse_ratio_weights(labels);
    return {cfg.w_p.value_or(derived.positive), cfg.w_n.value_or(derived.negative)};
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

TrainResult run(CompositeClassifier model, std::span<const Sample> samples, std::span<const data::Label> labels,
                const TrainConfig& cfg) {
    cfg.validate();
    if (samples.size() != labels.size()) throw Error(ErrorKind::LengthMismatch, "samples and labels differ in length");
    const ClassWeights weights = resolve_weights(labels, cfg);

    TrainResult result;
    AdamState adam;
    // Shuffling draws from a stream separate from initialization.
    std::mt19937_64 rng(splitmix64(cfg.seed));
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<Sample> batch;
    std::vector<data::Label> batch_labels;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with an explicit draw so the order does not depend on the library.
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            batch.clear();
            batch_labels.clear();
            for (std::size_t i = start; i < end; ++i) {
                batch.push_back(samples[order[i]]);
                batch_labels.push_back(labels[order[i]]);
            }
            auto g = backward(model, batch, batch_labels, weights);
            loss_sum += g.loss * static_cast<double>(end - start);
            if (cfg.grad_clip) clip_gradient(g.grad, *cfg.grad_clip);
            adam_step(model, g.grad, adam, cfg.lr);
        }
        const double epoch_loss = loss_sum / static_cast<double>(order.size());
        if (!std::isfinite(epoch_loss) || !model.all_finite()) {
            throw Error(ErrorKind::InvalidConfig, "training diverged at epoch " + std::to_string(epoch));
        }
        result.loss_history.push_back(epoch_loss);
    }
    result.model = std::move(model);
    return result;
}

}  // namespace

TrainResult train(const Architecture& arch, std::span<const Sample> samples, std::span<const data::Label> labels,
                  const TrainConfig& cfg) {
    cfg.validate();
    inverse_ratio_weights(labels);  // reject single-class input before doing any work
    return run(init_model(arch, cfg.seed), samples, labels, cfg);
}

TrainResult continue_training(CompositeClassifier model, std::span<const Sample> samples,
                              std::span<const data::Label> labels, const TrainConfig& cfg) {
    return run(std::move(model), samples, labels, cfg);
}

std::map<std::size_t, CompositeClassifier> fine_tune_per_cluster(const CompositeClassifier& base,
                                                                 std::span<const std::size_t> assignments,
                                                                 std::size_t k, std::span<const Sample> samples,
                                                                 std::span<const data::Label> labels,
                                                                 const TrainConfig& cfg) {
    if (assignments.size() != samples.size() || labels.size() != samples.size()) {
        throw Error(ErrorKind::LengthMismatch, "assignments, samples and labels differ in length");
    }
    std::map<std::size_t, CompositeClassifier> out;
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<Sample> sub;
        std::vector<data::Label> sub_labels;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (assignments[i] != c) continue;
            sub.push_back(samples[i]);
            sub_labels.push_back(labels[i]);
        }
        const auto pos = std::count(sub_labels.begin(), sub_labels.end(), data::Label{1});
        if (pos == 0 || pos == static_cast<std::ptrdiff_t>(sub_labels.size())) continue;
        TrainConfig local = cfg;
        local.seed = cfg.seed + c;
        local.w_p.reset();
        local.w_n.reset();
        out.emplace(c, continue_training(base, sub, sub_labels, local).model);
    }
    return out;
}

std::vector<double> predict_all(const CompositeClassifier& model, std::span<const Sample> samples) {
    std::vector<double> p;
    p.reserve(samples.size());
    for (const auto& s : samples) p.push_back(forward(model, s));
    return p;
}

void round_to_float(CompositeClassifier& model) {
    for (auto& p : model.parameters()) {
        for (auto& v : p.tensor->data()) v = static_cast<double>(static_cast<float>(v));
    }
}

}  // namespace pdetect::nn
