#include "pdetect/freqfeat.hpp"

#include "csv.hpp"
#include "pdetect/error.hpp"

#include <fftw3.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <numeric>

namespace pdetect::freqfeat {

namespace {

struct FftwFree {
    void operator()(void* p) const noexcept { fftw_free(p); }
};
using RealBuffer = std::unique_ptr<double, FftwFree>;
using ComplexBuffer = std::unique_ptr<fftw_complex, FftwFree>;

// Planning in FFTW is not thread-safe; execution of an existing plan is.
std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}

fftw_plan r2c_plan(std::size_t n) {
    static std::map<std::size_t, fftw_plan> plans;
    std::lock_guard lock(plan_mutex());
    auto it = plans.find(n);
    if (it != plans.end()) return it->second;
    RealBuffer in(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
    ComplexBuffer out(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1))));
    fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE);
    plans.emplace(n, plan);
    return plan;
}

}  // namespace

Spectrum dft_magnitudes(std::span<const double> signal, double sample_rate_hz) {
    const std::size_t T = signal.size();
    if (T < 2) throw Error(ErrorKind::LengthMismatch, "spectrum needs at least 2 samples");
    fftw_plan plan = r2c_plan(T);
    RealBuffer in(static_cast<double*>(fftw_malloc(sizeof(double) * T)));
    ComplexBuffer out(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (T / 2 + 1))));
    std::copy(signal.begin(), signal.end(), in.get());
    fftw_execute_dft_r2c(plan, in.get(), out.get());

    Spectrum s;
    s.bin_hz = sample_rate_hz / static_cast<double>(T);
    s.magnitudes.resize(T / 2 + 1);
    for (std::size_t k = 0; k < s.magnitudes.size(); ++k) {
        s.magnitudes[k] = std::hypot(out.get()[k][0], out.get()[k][1]);
    }
    return s;
}

// --- mutual information ---------------------------------------------------

std::vector<std::size_t> quantile_bins(std::span<const double> feature, std::size_t n_bins) {
    const std::size_t n = feature.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return feature[a] < feature[b]; });
    std::vector<std::size_t> bins(n, 0);
    std::size_t current = 0;
    for (std::size_t p = 0; p < n; ++p) {
        // A run of equal values keeps the bin of its first member.
        if (p == 0 || feature[order[p]] != feature[order[p - 1]]) current = p * n_bins / n;
        bins[order[p]] = current;
    }
    return bins;
}

double mutual_information(std::span<const double> feature, std::span<const data::Label> labels, std::size_t n_bins) {
    if (feature.size() != labels.size()) throw Error(ErrorKind::LengthMismatch, "feature/label length differ");
    if (feature.size() < 2) throw Error(ErrorKind::TooFewPoints, "mutual information needs >= 2 signals");
    if (n_bins < 2) throw Error(ErrorKind::InvalidConfig, "n_bins must be >= 2");

    const std::size_t n = feature.size();
    const auto bins = quantile_bins(feature, n_bins);
    std::vector<std::array<std::size_t, 2>> joint(n_bins, {0, 0});
    std::array<std::size_t, 2> label_count{0, 0};
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t y = labels[i] ? 1 : 0;
        ++joint[bins[i]][y];
        ++label_count[y];
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    double mi = 0.0;
    for (const auto& row : joint) {
        const double px = static_cast<double>(row[0] + row[1]) * inv_n;
        for (std::size_t y = 0; y < 2; ++y) {
            if (row[y] == 0) continue;
            const double pxy = static_cast<double>(row[y]) * inv_n;
            const double py = static_cast<double>(label_count[y]) * inv_n;
            mi += pxy * std::log(pxy / (px * py));
        }
    }
    // Rounding can leave -1e-17 for independent inputs.
    return std::max(mi, 0.0);
}

std::size_t selection_size(double fraction, std::size_t n_bins_total) {
    // 1e-12 slack keeps 0.01 * 400 from ceiling to 5 because of representation error.
    const double raw = fraction * static_cast<double>(n_bins_total);
    const auto count = static_cast<std::size_t>(std::ceil(raw - 1e-12 * std::max(1.0, raw)));
    return std::clamp<std::size_t>(count, 1, n_bins_total);
}

std::vector<double> SpectrumSelection::selected_scores() const {
    std::vector<double> out;
    out.reserve(selected_bins.size());
    for (auto b : selected_bins) out.push_back(b < mi_scores.size() ? mi_scores[b] : 0.0);
    return out;
}

SpectrumSelection select_top_coefficients(const std::vector<std::vector<double>>& spectra,
                                          std::span<const data::Label> labels, std::size_t T,
                                          double sample_rate_hz, double fraction, std::size_t n_bins) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw Error(ErrorKind::InvalidConfig, "fraction must lie in (0,1]");
    if (spectra.size() != labels.size()) throw Error(ErrorKind::LengthMismatch, "spectra/label count differ");
    const std::size_t bins_total = T / 2 + 1;

    SpectrumSelection sel;
    sel.T = T;
    sel.sample_rate_hz = sample_rate_hz;
    sel.fraction = fraction;
    sel.n_bins = n_bins;
    sel.n_bins_total = bins_total;
    sel.mi_scores.assign(bins_total, 0.0);

    std::vector<double> column(spectra.size());
    for (std::size_t k = 0; k < bins_total; ++k) {
        for (std::size_t i = 0; i < spectra.size(); ++i) {
            if (spectra[i].size() != bins_total) throw Error(ErrorKind::LengthMismatch, "spectrum length differs");
            column[i] = spectra[i][k];
        }
        sel.mi_scores[k] = mutual_information(column, labels, n_bins);
    }

    std::vector<std::size_t> order(bins_total);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sel.mi_scores[a] > sel.mi_scores[b]; });
    order.resize(selection_size(fraction, bins_total));
    std::sort(order.begin(), order.end());
    sel.selected_bins = std::move(order);
    return sel;
}

SpectrumSelection select_top_coefficients(const data::SignalSet& set, double fraction, std::size_t n_bins) {
    const auto labels = data::labels_of(set);
    std::vector<std::vector<double>> spectra;
    spectra.reserve(set.size());
    std::vector<double> x(set.T);
    for (const auto& r : set.records) {
        std::copy(r.samples.begin(), r.samples.end(), x.begin());
        spectra.push_back(dft_magnitudes(x, set.sample_rate_hz).magnitudes);
    }
    return select_top_coefficients(spectra, labels, set.T, set.sample_rate_hz, fraction, n_bins);
}

// --- sparse projection ----------------------------------------------------

SparseProjector::SparseProjector(const SpectrumSelection& sel) : T_(sel.T), bins_(sel.selected_bins) {
    if (T_ < 2) throw Error(ErrorKind::InvalidConfig, "selection has no signal length");
    for (auto b : bins_) {
        if (b >= T_) throw Error(ErrorKind::InvalidConfig, "selected bin " + std::to_string(b) + " out of range");
    }
    // For T divisible by 4 a real input only needs the first quarter period of each row:
    // the other three quarters are mirror images up to sign.
    folded_ = T_ % 4 == 0 && T_ >= 8;
    width_ = folded_ ? T_ / 4 + 1 : T_;
    cos_.resize(bins_.size() * width_);
    sin_.resize(bins_.size() * width_);
    for (std::size_t r = 0; r < bins_.size(); ++r) {
        for (std::size_t n = 0; n < width_; ++n) {
            // (k * n) mod T keeps the angle small and exact for large T.
            const std::size_t phase = static_cast<std::size_t>(
                (static_cast<unsigned long long>(bins_[r]) * n) % static_cast<unsigned long long>(T_));
            const double angle = 2.0 * std::numbers::pi * static_cast<double>(phase) / static_cast<double>(T_);
            cos_[r * width_ + n] = std::cos(angle);
            sin_[r * width_ + n] = std::sin(angle);
        }
    }
}

FreqFeatureVector SparseProjector::project(std::span<const double> signal) const {
    if (signal.size() != T_) {
        throw Error(ErrorKind::LengthMismatch, "signal length " + std::to_string(signal.size()) +
                                                   " differs from fitted length " + std::to_string(T_));
    }
    FreqFeatureVector out;
    out.values.resize(bins_.size());
    const double* x = signal.data();

    if (!folded_) {
        for (std::size_t r = 0; r < bins_.size(); ++r) {
            const double* c = cos_.data() + r * T_;
            const double* s = sin_.data() + r * T_;
            double re = 0.0, im = 0.0;
            for (std::size_t n = 0; n < T_; ++n) {
                re += x[n] * c[n];
                im -= x[n] * s[n];
            }
            out.values[r] = std::hypot(re, im);
        }
        return out;
    }

    // With theta = 2 pi k n / T and s = (-1)^k, the samples n, T-n, T/2-n and T/2+n see
    // (cos, sin) = (c, v), (c, -v), (s c, -s v) and (s c, s v).
    const std::size_t Q = T_ / 4, H = T_ / 2;
    std::vector<double> re_even(Q), re_odd(Q), im_even(Q), im_odd(Q);
    for (std::size_t n = 1; n < Q; ++n) {
        const double a = x[n] + x[T_ - n];
        const double b = x[H - n] + x[H + n];
        const double c = x[n] - x[T_ - n];
        const double d = x[H + n] - x[H - n];
        re_even[n] = a + b;
        re_odd[n] = a - b;
        im_even[n] = c + d;
        im_odd[n] = c - d;
    }
    for (std::size_t r = 0; r < bins_.size(); ++r) {
        const bool odd = bins_[r] % 2 == 1;
        const double sign = odd ? -1.0 : 1.0;
        const double* c = cos_.data() + r * width_;
        const double* v = sin_.data() + r * width_;
        const double* fr = odd ? re_odd.data() : re_even.data();
        const double* fi = odd ? im_odd.data() : im_even.data();
        double re = x[0] + sign * x[H];
        double im = 0.0;
        for (std::size_t n = 1; n < Q; ++n) {
            re += c[n] * fr[n];
            im += v[n] * fi[n];
        }
        const double quarter = x[Q] + sign * x[3 * Q];
        re += c[Q] * quarter;
        im += v[Q] * quarter;
        out.values[r] = std::hypot(re, im);
    }
    return out;
}

FreqFeatureVector sparse_project(std::span<const double> signal, const SpectrumSelection& sel) {
    if (signal.size() != sel.T) {
        throw Error(ErrorKind::LengthMismatch, "signal length " + std::to_string(signal.size()) +
                                                   " differs from fitted length " + std::to_string(sel.T));
    }
    return SparseProjector(sel).project(signal);
}

// --- reports and persistence ----------------------------------------------

void mi_report(const SpectrumSelection& sel, const std::filesystem::path& path) {
    std::vector<std::size_t> order(sel.mi_scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sel.mi_scores[a] > sel.mi_scores[b]; });
    std::vector<bool> selected(sel.mi_scores.size(), false);
    for (auto b : sel.selected_bins) {
        if (b < selected.size()) selected[b] = true;
    }
    std::string out = "bin,hz,mi_score,selected\n";
    for (auto b : order) {
        out += std::to_string(b) + "," + csv::fmt_double(static_cast<double>(b) * sel.bin_hz()) + "," +
               csv::fmt_double(sel.mi_scores[b]) + "," + (selected[b] ? "1" : "0") + "\n";
    }
    csv::write_text(path, out);
}

std::vector<MiReportRow> read_mi_report(const std::filesystem::path& path) {
    const auto lines = csv::read_lines(path);
    std::vector<MiReportRow> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = csv::split(lines[i]);
        if (f.size() != 4) throw Error(ErrorKind::HeaderMismatch, path.string() + ": expected 4 fields");
        rows.push_back({static_cast<std::size_t>(csv::to_double(f[0])), csv::to_double(f[1]), csv::to_double(f[2]),
                        f[3] == "1"});
    }
    return rows;
}

std::vector<std::size_t> band_histogram(const SpectrumSelection& sel, std::size_t n_bands) {
    std::vector<std::size_t> counts(n_bands, 0);
    if (n_bands == 0) return counts;
    const double nyquist = sel.sample_rate_hz / 2.0;
    for (auto b : sel.selected_bins) {
        const double hz = static_cast<double>(b) * sel.bin_hz();
        auto band = static_cast<std::size_t>(hz / nyquist * static_cast<double>(n_bands));
        ++counts[std::min(band, n_bands - 1)];
    }
    return counts;
}

void save_selection(const SpectrumSelection& sel, const std::filesystem::path& path) {
    nlohmann::json j;
    j["T"] = sel.T;
    j["fraction"] = sel.fraction;
    j["n_bins"] = sel.n_bins;
    j["selected_bins"] = sel.selected_bins;
    j["mi_scores_selected"] = sel.selected_scores();
    j["sample_rate_hz"] = sel.sample_rate_hz;
    j["mi_scores"] = sel.mi_scores;
    csv::write_text(path, j.dump(2) + "\n");
}

SpectrumSelection load_selection(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::MissingFile, path.string());
    nlohmann::json j;
    try {
        in >> j;
        SpectrumSelection sel;
        sel.T = j.at("T").get<std::size_t>();
        sel.fraction = j.at("fraction").get<double>();
        sel.n_bins = j.at("n_bins").get<std::size_t>();
        sel.selected_bins = j.at("selected_bins").get<std::vector<std::size_t>>();
        sel.sample_rate_hz = j.value("sample_rate_hz", 1.0);
        sel.n_bins_total = sel.T / 2 + 1;
        if (j.contains("mi_scores")) {
            sel.mi_scores = j.at("mi_scores").get<std::vector<double>>();
        } else {
            const auto scores = j.at("mi_scores_selected").get<std::vector<double>>();
            sel.mi_scores.assign(sel.n_bins_total, 0.0);
            for (std::size_t i = 0; i < sel.selected_bins.size() && i < scores.size(); ++i) {
                sel.mi_scores.at(sel.selected_bins[i]) = scores[i];
            }
        }
        for (auto b : sel.selected_bins) {
            if (b >= sel.n_bins_total) throw Error(ErrorKind::HeaderMismatch, "selected bin out of range");
        }
        return sel;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::HeaderMismatch, path.string() + ": " + e.what());
    }
}

}  // namespace pdetect::freqfeat
