#pragma once

#include "pdetect/cluster.hpp"
#include "pdetect/data.hpp"
#include "pdetect/freqfeat.hpp"
#include "pdetect/nn/bundle.hpp"
#include "pdetect/nn/features.hpp"
#include "pdetect/nn/model.hpp"
#include "pdetect/nn/train.hpp"
#include "pdetect/timefeat.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pdetect::pipeline {

// --- metrics --------------------------------------------------------------

struct Confusion {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
    bool operator==(const Confusion&) const = default;
};

// Predicts positive iff score >= threshold.
Confusion confusion(std::span<const double> scores, std::span<const data::Label> labels, double threshold = 0.5);

double f1_score(const Confusion& c);     // 0 when tp = 0
double mcc(const Confusion& c);          // 0 when the denominator is 0
double accuracy(const Confusion& c);
// Rank statistic: P(score_pos > score_neg) + 0.5 P(tie). Throws SingleClass.
double roc_auc(std::span<const double> scores, std::span<const data::Label> labels);

struct Metrics {
    double threshold = 0.5;
    double f1 = 0.0;
    std::optional<double> mcc;  // absent when only one class is present
    std::optional<double> auc;
    double accuracy = 0.0;
    Confusion counts;

    bool partial() const { return !mcc || !auc; }
};

// Throws SingleClass when labels hold one class, unless allow_partial is set, in which
// case MCC and AUC are left empty.
Metrics compute_metrics(std::span<const double> scores, std::span<const data::Label> labels, double threshold = 0.5,
                        bool allow_partial = false);

std::vector<Metrics> threshold_sweep(std::span<const double> scores, std::span<const data::Label> labels,
                                     std::span<const double> thresholds);

struct MetricsRow {
    std::string method;
    Metrics metrics;
};

// method,threshold,f1,mcc,auc,accuracy. Empty cells for metrics that are undefined.
void write_metrics_csv(std::span<const MetricsRow> rows, const std::filesystem::path& path);
std::string format_metrics_csv(std::span<const MetricsRow> rows);

// --- feature extraction ---------------------------------------------------

std::vector<nn::SignalFeatures> extract_features(const data::SignalSet& set, const timefeat::TimeFeatureConfig& time,
                                                 const freqfeat::SparseProjector& projector);

cluster::FeatureMatrix routing_matrix(std::span<const nn::SignalFeatures> features);

// --- configuration --------------------------------------------------------

struct PipelineConfig {
    std::uint64_t seed = 7;
    double threshold = 0.5;
    double test_fraction = 0.2;
    data::SynthConfig synth;
    timefeat::TimeFeatureConfig time;
    double select_fraction = 0.01;
    std::size_t mi_bins = 10;
    cluster::KMeansOptions kmeans;
    nn::Architecture arch;
    nn::TrainConfig train;
    nn::TrainConfig finetune;

    PipelineConfig();
    // Propagates seed into every stage that draws random numbers.
    void set_seed(std::uint64_t s);
};

// JSON, or a flat TOML subset ([section] headers, key = number | bool | "string" | [list]).
// Sections: synth, features, select, cluster, model, train, finetune; top-level seed,
// threshold, test_fraction. Keys mirror the struct field names.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(const std::string& text, bool toml);

// --- end to end -----------------------------------------------------------

struct RunResult {
    Metrics pooled;
    Metrics multitask;
    nn::ModelBundle bundle;
    cluster::ClusterReport train_clusters;
    std::vector<double> base_loss;
    std::vector<std::size_t> test_assignments;
    std::vector<double> pooled_scores;
    std::vector<double> routed_scores;
};

// Selection, features, clustering, base training, per-cluster fine-tuning and evaluation
// on test. Models are rounded to checkpoint precision before use, so a reloaded bundle
// scores exactly like the in-memory one. Artifacts go to out_dir when given.
RunResult run_end_to_end(const data::SignalSet& train, const data::SignalSet& test, const PipelineConfig& cfg,
                         const std::optional<std::filesystem::path>& out_dir = std::nullopt);

// --- timing ---------------------------------------------------------------

struct StageTiming {
    std::string name;
    double mean_seconds = 0.0;  // per signal
    std::size_t runs = 0;
};

struct TimingReport {
    std::vector<StageTiming> stages;
    const StageTiming* find(const std::string& name) const;
};

// Stages: peak_extraction (filter, maxima, truncation, statistics), chunk_statistics,
// mi_selected_dft (sparse projection with a prebuilt projector) and full_fft.
TimingReport benchmark_features(const data::SignalSet& set, std::size_t repetitions,
                                const timefeat::TimeFeatureConfig& time, const freqfeat::SpectrumSelection& selection);

void write_timing_csv(const TimingReport& report, const std::filesystem::path& path);

}  // namespace pdetect::pipeline
