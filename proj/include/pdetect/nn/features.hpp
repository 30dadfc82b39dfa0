#pragma once

#include "pdetect/freqfeat.hpp"
#include "pdetect/nn/model.hpp"
#include "pdetect/timefeat.hpp"

#include <span>
#include <vector>

namespace pdetect::nn {

// Everything the classifier and the router see for one signal, before scaling.
struct SignalFeatures {
    timefeat::ChunkMatrix chunks;
    freqfeat::FreqFeatureVector freq;  // raw magnitudes, also the clustering input
    timefeat::PeakFeatureVector peaks;
};

// Per-feature standardization fitted on training signals. Chunk statistics are scaled
// per statistic (shared across chunks), magnitudes per bin after log1p, peak features
// individually. Standardized values are clamped to +-clamp.
struct FeatureScaler {
    std::vector<double> chunk_mean, chunk_std;
    std::vector<double> freq_mean, freq_std;
    std::vector<double> peak_mean, peak_std;
    double clamp = 8.0;

    static FeatureScaler fit(std::span<const SignalFeatures> features);
    Sample transform(const SignalFeatures& f) const;
    std::vector<Sample> transform(std::span<const SignalFeatures> features) const;

    bool operator==(const FeatureScaler&) const = default;
};

// Model input widths implied by a feature set.
Architecture architecture_for(const SignalFeatures& example, Architecture base = {});

}  // namespace pdetect::nn
