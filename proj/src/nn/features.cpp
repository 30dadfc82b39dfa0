#include "pdetect/nn/features.hpp"

#include "pdetect/error.hpp"

#include <algorithm>
#include <cmath>

namespace pdetect::nn {

namespace {

// Running mean and population variance (Welford).
struct Moments {
    std::size_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++n;
        const double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }
    double stddev() const {
        const double sd = n > 0 ? std::sqrt(m2 / static_cast<double>(n)) : 0.0;
        return sd > 1e-12 ? sd : 1.0;
    }
};

void finish(const std::vector<Moments>& acc, std::vector<double>& mean, std::vector<double>& sd) {
    mean.clear();
    sd.clear();
    for (const auto& a : acc) {
        mean.push_back(a.mean);
        sd.push_back(a.stddev());
    }
}

double scale(double x, double mean, double sd, double clamp) { return std::clamp((x - mean) / sd, -clamp, clamp); }

}  // namespace

FeatureScaler FeatureScaler::fit(std::span<const SignalFeatures> features) {
    if (features.empty()) throw Error(ErrorKind::EmptySet, "cannot fit a scaler on zero signals");
    const auto& first = features.front();
    const std::size_t r = first.chunks.r;
    const std::size_t d = first.freq.values.size();
    std::vector<Moments> chunk(r), freq(d), peak(timefeat::PeakFeatureVector::kWidth);
    for (const auto& f : features) {
        if (f.chunks.r != r || f.chunks.m != first.chunks.m || f.freq.values.size() != d) {
            throw Error(ErrorKind::ShapeMismatch, "signals disagree on feature dimensions");
        }
        for (std::size_t s = 0; s < r; ++s) {
            for (std::size_t j = 0; j < f.chunks.m; ++j) chunk[s].add(f.chunks.at(s, j));
        }
        for (std::size_t b = 0; b < d; ++b) freq[b].add(std::log1p(f.freq.values[b]));
        const auto pv = f.peaks.as_vector();
        for (std::size_t i = 0; i < pv.size(); ++i) peak[i].add(pv[i]);
    }
    FeatureScaler sc;
    finish(chunk, sc.chunk_mean, sc.chunk_std);
    finish(freq, sc.freq_mean, sc.freq_std);
    finish(peak, sc.peak_mean, sc.peak_std);
    return sc;
}

Sample FeatureScaler::transform(const SignalFeatures& f) const {
    if (f.chunks.r != chunk_mean.size() || f.freq.values.size() != freq_mean.size()) {
        throw Error(ErrorKind::ShapeMismatch, "features do not match the fitted scaler");
    }
    Sample s;
    const std::size_t r = f.chunks.r, m = f.chunks.m;
    s.sequence = Tensor({m, r});
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t st = 0; st < r; ++st) {
            s.sequence.at(j, st) = scale(f.chunks.at(st, j), chunk_mean[st], chunk_std[st], clamp);
        }
    }
    s.freq.resize(f.freq.values.size());
    for (std::size_t b = 0; b < s.freq.size(); ++b) {
        s.freq[b] = scale(std::log1p(f.freq.values[b]), freq_mean[b], freq_std[b], clamp);
    }
    const auto pv = f.peaks.as_vector();
    s.peaks.resize(pv.size());
    for (std::size_t i = 0; i < pv.size(); ++i) s.peaks[i] = scale(pv[i], peak_mean[i], peak_std[i], clamp);
    return s;
}

std::vector<Sample> FeatureScaler::transform(std::span<const SignalFeatures> features) const {
    std::vector<Sample> out;
    out.reserve(features.size());
    for (const auto& f : features) out.push_back(transform(f));
    return out;
}

Architecture architecture_for(const SignalFeatures& example, Architecture base) {
    base.chunk_stats = example.chunks.r;
    base.freq_bins = example.freq.values.size();
    base.peak_features = timefeat::PeakFeatureVector::kWidth;
    base.validate();
    return base;
}

}  // namespace pdetect::nn
