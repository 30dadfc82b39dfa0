#pragma once

#include "pdetect/data.hpp"

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace pdetect::timefeat {

struct FilteredSignal {
    std::vector<double> samples;
    double cutoff_hz = 0.0;
};

struct PeakSet {
    std::vector<std::size_t> indices;  // strictly increasing
    std::vector<double> amplitudes;    // |filtered| at each index
    std::size_t neighborhood = 1;
    double noise_threshold = 0.0;
};

struct PeakFeatureVector {
    double count = 0.0;
    double mean_amp = 0.0;
    double std_amp = 0.0;
    double max_amp = 0.0;
    double min_amp = 0.0;
    double mean_gap = 0.0;
    double std_gap = 0.0;
    double first_idx_frac = 0.0;
    double last_idx_frac = 0.0;

    static constexpr std::size_t kWidth = 9;
    static const std::vector<std::string>& names();
    std::vector<double> as_vector() const;
};

enum class ChunkStat {
    Mean,
    Std,
    Min,
    Max,
    Median,
    P1,
    P5,
    P25,
    P75,
    P95,
    P99,
    Skewness,
    ExcessKurtosis,
    Rms,
    MeanAbs,
    Range,
    ZeroCrossingRate,
    OutlierRate,
    MeanAbsDiff,
};

const char* to_string(ChunkStat stat) noexcept;
const std::vector<ChunkStat>& default_chunk_stats();

// r x m statistics matrix, row-major: values[s * m + j] is statistic s of chunk j.
struct ChunkMatrix {
    std::size_t r = 0;
    std::size_t m = 0;
    std::vector<double> values;
    std::vector<std::string> stat_names;

    double at(std::size_t stat, std::size_t chunk) const { return values[stat * m + chunk]; }
    double& at(std::size_t stat, std::size_t chunk) { return values[stat * m + chunk]; }
};

// First-order recursive high-pass, y[0] = 0,
// y[n] = a (y[n-1] + x[n] - x[n-1]) with a = 1 / (1 + 2 pi cutoff / rate).
FilteredSignal high_pass(std::span<const double> x, double cutoff_hz, double sample_rate_hz);
FilteredSignal high_pass(const data::SignalRecord& signal, double cutoff_hz);

// Strict local maxima of |y| within +-neighborhood, sorted by amplitude and cut at the
// first consecutive gap below noise_threshold. The last sorted maximum is compared
// against zero.
PeakSet extract_peaks(const FilteredSignal& filtered, std::size_t neighborhood, double noise_threshold);

PeakFeatureVector peak_features(const PeakSet& peaks, std::size_t T);

ChunkMatrix chunk_statistics(std::span<const double> signal, std::size_t m,
                             const std::vector<ChunkStat>& stats = default_chunk_stats());

// Defaults derived from the sampling parameters of a set.
struct TimeFeatureConfig {
    double cutoff_hz = 0.0;             // 0: 200 * rate / T
    std::size_t neighborhood = 0;       // 0: 2.5 us worth of samples
    double threshold_factor = 0.5;      // noise threshold = factor * std(filtered)
    std::size_t chunks = 160;

    double resolved_cutoff(double sample_rate_hz, std::size_t T) const;
    std::size_t resolved_neighborhood(double sample_rate_hz) const;
};

struct TimeFeatures {
    ChunkMatrix chunks;
    PeakFeatureVector peaks;
};

double population_std(std::span<const double> x);

// Full per-signal time-domain stage: filter, peaks, peak features and chunk matrix
// (computed on the filtered signal).
TimeFeatures extract_time_features(const data::SignalRecord& signal, const TimeFeatureConfig& cfg);

// CSV with one signal per row: id followed by the named columns.
void write_peak_features_csv(const std::filesystem::path& path, std::span<const std::int64_t> ids,
                             std::span<const PeakFeatureVector> rows);
void write_chunk_matrices_csv(const std::filesystem::path& path, std::span<const std::int64_t> ids,
                              std::span<const ChunkMatrix> rows);
std::vector<PeakFeatureVector> read_peak_features_csv(const std::filesystem::path& path,
                                                      std::vector<std::int64_t>* ids = nullptr);
std::vector<ChunkMatrix> read_chunk_matrices_csv(const std::filesystem::path& path,
                                                 std::vector<std::int64_t>* ids = nullptr);

}  // namespace pdetect::timefeat
