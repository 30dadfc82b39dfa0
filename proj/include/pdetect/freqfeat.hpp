#pragma once

#include "pdetect/data.hpp"

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace pdetect::freqfeat {

// |X_k| for k = 0..floor(T/2) of a real input.
struct Spectrum {
    std::vector<double> magnitudes;
    double bin_hz = 1.0;
};

struct SpectrumSelection {
    std::size_t T = 0;
    double sample_rate_hz = 1.0;
    double fraction = 0.01;
    std::size_t n_bins = 10;           // MI quantile bins
    std::size_t n_bins_total = 0;      // floor(T/2) + 1 spectral bins
    std::vector<double> mi_scores;     // per spectral bin, nats
    std::vector<std::size_t> selected_bins;  // ascending

    double bin_hz() const { return sample_rate_hz / static_cast<double>(T); }
    std::vector<double> selected_scores() const;
};

struct FreqFeatureVector {
    std::vector<double> values;  // ordered like SpectrumSelection::selected_bins
};

Spectrum dft_magnitudes(std::span<const double> signal, double sample_rate_hz = 1.0);

// Empirical MI (nats) between a quantile-binned feature and binary labels.
double mutual_information(std::span<const double> feature, std::span<const data::Label> labels,
                          std::size_t n_bins);

// Bin assignment used by mutual_information: depends only on the ordering of the
// values, and equal values always share a bin.
std::vector<std::size_t> quantile_bins(std::span<const double> feature, std::size_t n_bins);

std::size_t selection_size(double fraction, std::size_t n_bins_total);

SpectrumSelection select_top_coefficients(const data::SignalSet& set, double fraction = 0.01,
                                          std::size_t n_bins = 10);

// Same, from precomputed magnitude spectra (one row per signal).
SpectrumSelection select_top_coefficients(const std::vector<std::vector<double>>& spectra,
                                          std::span<const data::Label> labels, std::size_t T,
                                          double sample_rate_hz, double fraction, std::size_t n_bins);

// Only the selected DFT rows, evaluated directly.
FreqFeatureVector sparse_project(std::span<const double> signal, const SpectrumSelection& sel);

// Selected rows of the DFT matrix. Repeated projections cost |selected| * T
// multiply-adds and no trigonometry.
class SparseProjector {
public:
    explicit SparseProjector(const SpectrumSelection& sel);

    FreqFeatureVector project(std::span<const double> signal) const;
    std::size_t rows() const noexcept { return bins_.size(); }
    std::size_t length() const noexcept { return T_; }

private:
    std::size_t T_ = 0;
    std::vector<std::size_t> bins_;
    bool folded_ = false;
    std::size_t width_ = 0;    // stored entries per row
    std::vector<double> cos_;  // rows() x width_, row-major
    std::vector<double> sin_;
};

// (bin, hz, mi_score, selected) sorted by score descending, ties by bin.
void mi_report(const SpectrumSelection& sel, const std::filesystem::path& path);

struct MiReportRow {
    std::size_t bin = 0;
    double hz = 0.0;
    double mi_score = 0.0;
    bool selected = false;
};
std::vector<MiReportRow> read_mi_report(const std::filesystem::path& path);

// Counts of selected bins in n_bands equal-width bands over [0, rate/2].
std::vector<std::size_t> band_histogram(const SpectrumSelection& sel, std::size_t n_bands);

void save_selection(const SpectrumSelection& sel, const std::filesystem::path& path);
SpectrumSelection load_selection(const std::filesystem::path& path);

}  // namespace pdetect::freqfeat
