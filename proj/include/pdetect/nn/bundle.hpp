#pragma once

#include "pdetect/cluster.hpp"
#include "pdetect/freqfeat.hpp"
#include "pdetect/nn/features.hpp"
#include "pdetect/nn/model.hpp"
#include "pdetect/nn/train.hpp"
#include "pdetect/timefeat.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace pdetect::nn {

struct CheckpointMeta {
    std::uint64_t seed = 0;
    std::optional<TrainConfig> config;
    std::vector<double> loss_history;
};

// Directory with manifest.json and one little-endian f32 blob per layer. Parameters are
// stored as float, so a reload equals the model after round_to_float().
void save_checkpoint(const CompositeClassifier& model, const std::filesystem::path& dir,
                     const CheckpointMeta& meta = {});
CompositeClassifier load_checkpoint(const std::filesystem::path& dir, CheckpointMeta* meta = nullptr);

struct ModelBundle {
    CompositeClassifier base;
    std::map<std::size_t, CompositeClassifier> per_cluster;
    freqfeat::SpectrumSelection selection;
    cluster::ClusterModel cluster_model;
    FeatureScaler scaler;
    timefeat::TimeFeatureConfig time_config;

    std::size_t route(const SignalFeatures& f) const;
    // per_cluster model of the cluster, or base when it has none.
    const CompositeClassifier& model_for(std::size_t cluster) const;
};

// Routes by nearest centroid and scores with that cluster's classifier.
double predict(const ModelBundle& bundle, const SignalFeatures& f);
std::vector<double> predict(const ModelBundle& bundle, std::span<const SignalFeatures> features);
// Base model only, ignoring the per-cluster models.
std::vector<double> predict_pooled(const ModelBundle& bundle, std::span<const SignalFeatures> features);

// base/, cluster_<id>/, selection.json, cluster_model.json, features.json.
void save_bundle(const ModelBundle& bundle, const std::filesystem::path& dir);
ModelBundle load_bundle(const std::filesystem::path& dir);

void save_scaler(const FeatureScaler& scaler, const timefeat::TimeFeatureConfig& time_config,
                 const std::filesystem::path& path);
void load_scaler(const std::filesystem::path& path, FeatureScaler& scaler, timefeat::TimeFeatureConfig& time_config);

}  // namespace pdetect::nn
