#include "pdetect/timefeat.hpp"

#include "csv.hpp"
#include "pdetect/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace pdetect::timefeat {

namespace {

double percentile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double mean_of(std::span<const double> x) {
    return x.empty() ? 0.0 : std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

}  // namespace

double population_std(std::span<const double> x) {
    if (x.empty()) return 0.0;
    const double mu = mean_of(x);
    double acc = 0.0;
    for (double v : x) acc += (v - mu) * (v - mu);
    return std::sqrt(acc / static_cast<double>(x.size()));
}

// --- filtering ------------------------------------------------------------

FilteredSignal high_pass(std::span<const double> x, double cutoff_hz, double sample_rate_hz) {
    if (!(cutoff_hz > 0.0 && cutoff_hz < sample_rate_hz / 2.0)) {
        throw Error(ErrorKind::InvalidCutoff, "cutoff must satisfy 0 < cutoff < sample_rate/2");
    }
    const double alpha = 1.0 / (1.0 + 2.0 * std::numbers::pi * cutoff_hz / sample_rate_hz);
    FilteredSignal out;
    out.cutoff_hz = cutoff_hz;
    out.samples.assign(x.size(), 0.0);
    for (std::size_t n = 1; n < x.size(); ++n) {
        out.samples[n] = alpha * (out.samples[n - 1] + x[n] - x[n - 1]);
    }
    return out;
}

FilteredSignal high_pass(const data::SignalRecord& signal, double cutoff_hz) {
    std::vector<double> x(signal.samples.begin(), signal.samples.end());
    return high_pass(x, cutoff_hz, signal.sample_rate_hz);
}

// --- peaks ----------------------------------------------------------------

PeakSet extract_peaks(const FilteredSignal& filtered, std::size_t neighborhood, double noise_threshold) {
    if (neighborhood < 1) throw Error(ErrorKind::InvalidConfig, "neighborhood must be >= 1");
    if (!(noise_threshold >= 0.0)) throw Error(ErrorKind::InvalidConfig, "noise threshold must be >= 0");

    const auto& y = filtered.samples;
    const std::size_t T = y.size();
    std::vector<double> mag(T);
    std::transform(y.begin(), y.end(), mag.begin(), [](double v) { return std::abs(v); });

    std::vector<std::size_t> maxima;
    for (std::size_t i = 0; i < T; ++i) {
        const std::size_t lo = i >= neighborhood ? i - neighborhood : 0;
        const std::size_t hi = std::min(T - 1, i + neighborhood);
        bool strict = true;
        for (std::size_t j = lo; j <= hi && strict; ++j) {
            if (j != i && mag[j] >= mag[i]) strict = false;
        }
        if (strict) maxima.push_back(i);
    }

    std::stable_sort(maxima.begin(), maxima.end(),
                     [&](std::size_t a, std::size_t b) { return mag[a] > mag[b]; });

    std::size_t kept = 0;
    for (std::size_t n = 0; n < maxima.size(); ++n) {
        const double next = n + 1 < maxima.size() ? mag[maxima[n + 1]] : 0.0;
        if (mag[maxima[n]] - next < noise_threshold) break;
        kept = n + 1;
    }
    maxima.resize(kept);
    std::sort(maxima.begin(), maxima.end());

    PeakSet peaks;
    peaks.neighborhood = neighborhood;
    peaks.noise_threshold = noise_threshold;
    peaks.indices = maxima;
    peaks.amplitudes.reserve(maxima.size());
    for (auto idx : maxima) peaks.amplitudes.push_back(mag[idx]);
    return peaks;
}

const std::vector<std::string>& PeakFeatureVector::names() {
    static const std::vector<std::string> kNames{"count",    "mean_amp", "std_amp",        "max_amp",      "min_amp",
                                                 "mean_gap", "std_gap",  "first_idx_frac", "last_idx_frac"};
    return kNames;
}

std::vector<double> PeakFeatureVector::as_vector() const {
    return {count, mean_amp, std_amp, max_amp, min_amp, mean_gap, std_gap, first_idx_frac, last_idx_frac};
}

PeakFeatureVector peak_features(const PeakSet& peaks, std::size_t T) {
    PeakFeatureVector f;
    const auto& amps = peaks.amplitudes;
    if (amps.empty()) return f;
    f.count = static_cast<double>(amps.size());
    f.mean_amp = mean_of(amps);
    f.std_amp = population_std(amps);
    f.max_amp = *std::max_element(amps.begin(), amps.end());
    f.min_amp = *std::min_element(amps.begin(), amps.end());
    if (peaks.indices.size() > 1) {
        std::vector<double> gaps;
        for (std::size_t i = 1; i < peaks.indices.size(); ++i) {
            gaps.push_back(static_cast<double>(peaks.indices[i] - peaks.indices[i - 1]));
        }
        f.mean_gap = mean_of(gaps);
        f.std_gap = population_std(gaps);
    }
    f.first_idx_frac = static_cast<double>(peaks.indices.front()) / static_cast<double>(T);
    f.last_idx_frac = static_cast<double>(peaks.indices.back()) / static_cast<double>(T);
    return f;
}

// --- chunk statistics -----------------------------------------------------

const char* to_string(ChunkStat stat) noexcept {
    switch (stat) {
        case ChunkStat::Mean: return "mean";
        case ChunkStat::Std: return "std";
        case ChunkStat::Min: return "min";
        case ChunkStat::Max: return "max";
        case ChunkStat::Median: return "median";
        case ChunkStat::P1: return "p1";
        case ChunkStat::P5: return "p5";
        case ChunkStat::P25: return "p25";
        case ChunkStat::P75: return "p75";
        case ChunkStat::P95: return "p95";
        case ChunkStat::P99: return "p99";
        case ChunkStat::Skewness: return "skewness";
        case ChunkStat::ExcessKurtosis: return "kurtosis";
        case ChunkStat::Rms: return "rms";
        case ChunkStat::MeanAbs: return "mean_abs";
        case ChunkStat::Range: return "range";
        case ChunkStat::ZeroCrossingRate: return "zero_cross";
        case ChunkStat::OutlierRate: return "outlier_rate";
        case ChunkStat::MeanAbsDiff: return "mean_abs_diff";
    }
    return "?";
}

const std::vector<ChunkStat>& default_chunk_stats() {
    static const std::vector<ChunkStat> kStats{
        ChunkStat::Mean,     ChunkStat::Std,     ChunkStat::Min,      ChunkStat::Max,
        ChunkStat::Median,   ChunkStat::P1,      ChunkStat::P5,       ChunkStat::P25,
        ChunkStat::P75,      ChunkStat::P95,     ChunkStat::P99,      ChunkStat::Skewness,
        ChunkStat::ExcessKurtosis, ChunkStat::Rms, ChunkStat::MeanAbs, ChunkStat::Range,
        ChunkStat::ZeroCrossingRate, ChunkStat::OutlierRate, ChunkStat::MeanAbsDiff,
    };
    return kStats;
}

ChunkMatrix chunk_statistics(std::span<const double> signal, std::size_t m, const std::vector<ChunkStat>& stats) {
    const std::size_t T = signal.size();
    if (m == 0 || T % m != 0 || T == 0) {
        throw Error(ErrorKind::NotDivisible,
                    std::to_string(m) + " chunks do not divide a signal of length " + std::to_string(T));
    }
    const std::size_t l = T / m;
    const double inv_l = 1.0 / static_cast<double>(l);

    ChunkMatrix out;
    out.r = stats.size();
    out.m = m;
    out.values.assign(out.r * m, 0.0);
    for (auto s : stats) out.stat_names.emplace_back(to_string(s));

    std::vector<double> sorted(l);
    for (std::size_t j = 0; j < m; ++j) {
        const auto chunk = signal.subspan(j * l, l);
        std::copy(chunk.begin(), chunk.end(), sorted.begin());
        std::sort(sorted.begin(), sorted.end());
        const bool constant = sorted.front() == sorted.back();

        double sum = 0.0, sum_abs = 0.0, sum_sq = 0.0, abs_diff = 0.0;
        std::size_t crossings = 0;
        for (std::size_t i = 0; i < l; ++i) {
            sum += chunk[i];
            sum_abs += std::abs(chunk[i]);
            sum_sq += chunk[i] * chunk[i];
            if (i > 0) {
                abs_diff += std::abs(chunk[i] - chunk[i - 1]);
                if ((chunk[i] < 0.0) != (chunk[i - 1] < 0.0)) ++crossings;
            }
        }
        const double mean = constant ? sorted.front() : sum * inv_l;
        double m2 = 0.0, m3 = 0.0, m4 = 0.0;
        if (!constant) {
            for (double v : chunk) {
                const double d = v - mean;
                const double d2 = d * d;
                m2 += d2;
                m3 += d2 * d;
                m4 += d2 * d2;
            }
            m2 *= inv_l;
            m3 *= inv_l;
            m4 *= inv_l;
        }
        const double sd = std::sqrt(m2);
        std::size_t outliers = 0;
        for (double v : chunk) {
            if (std::abs(v) > 2.0 * sd) ++outliers;
        }

        for (std::size_t s = 0; s < stats.size(); ++s) {
            double v = 0.0;
            switch (stats[s]) {
                case ChunkStat::Mean: v = mean; break;
                case ChunkStat::Std: v = sd; break;
                case ChunkStat::Min: v = sorted.front(); break;
                case ChunkStat::Max: v = sorted.back(); break;
                case ChunkStat::Median: v = percentile_sorted(sorted, 0.5); break;
                case ChunkStat::P1: v = percentile_sorted(sorted, 0.01); break;
                case ChunkStat::P5: v = percentile_sorted(sorted, 0.05); break;
                case ChunkStat::P25: v = percentile_sorted(sorted, 0.25); break;
                case ChunkStat::P75: v = percentile_sorted(sorted, 0.75); break;
                case ChunkStat::P95: v = percentile_sorted(sorted, 0.95); break;
                case ChunkStat::P99: v = percentile_sorted(sorted, 0.99); break;
                case ChunkStat::Skewness: v = m2 > 0.0 ? m3 / (m2 * sd) : 0.0; break;
                case ChunkStat::ExcessKurtosis: v = m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0; break;
                case ChunkStat::Rms: v = std::sqrt(sum_sq * inv_l); break;
                case ChunkStat::MeanAbs: v = sum_abs * inv_l; break;
                case ChunkStat::Range: v = sorted.back() - sorted.front(); break;
                case ChunkStat::ZeroCrossingRate: v = static_cast<double>(crossings) * inv_l; break;
                case ChunkStat::OutlierRate: v = static_cast<double>(outliers) * inv_l; break;
                case ChunkStat::MeanAbsDiff: v = abs_diff * inv_l; break;
            }
            out.at(s, j) = v;
        }
    }
    return out;
}

// --- per-signal stage -----------------------------------------------------

double TimeFeatureConfig::resolved_cutoff(double sample_rate_hz, std::size_t T) const {
    if (cutoff_hz > 0.0) return cutoff_hz;
    return 200.0 * sample_rate_hz / static_cast<double>(T);
}

std::size_t TimeFeatureConfig::resolved_neighborhood(double sample_rate_hz) const {
    if (neighborhood > 0) return neighborhood;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(2.5e-6 * sample_rate_hz)));
}

TimeFeatures extract_time_features(const data::SignalRecord& signal, const TimeFeatureConfig& cfg) {
    const std::size_t T = signal.samples.size();
    const auto filtered = high_pass(signal, cfg.resolved_cutoff(signal.sample_rate_hz, T));
    const double threshold = cfg.threshold_factor * population_std(filtered.samples);
    const auto peaks = extract_peaks(filtered, cfg.resolved_neighborhood(signal.sample_rate_hz), threshold);
    return TimeFeatures{chunk_statistics(filtered.samples, cfg.chunks), peak_features(peaks, T)};
}

// --- CSV ------------------------------------------------------------------

void write_peak_features_csv(const std::filesystem::path& path, std::span<const std::int64_t> ids,
                             std::span<const PeakFeatureVector> rows) {
    if (ids.size() != rows.size()) throw Error(ErrorKind::LengthMismatch, "ids and rows differ in length");
    std::string out = "id";
    for (const auto& n : PeakFeatureVector::names()) out += "," + n;
    out += '\n';
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out += std::to_string(ids[i]);
        for (double v : rows[i].as_vector()) out += "," + csv::fmt_double(v);
        out += '\n';
    }
    csv::write_text(path, out);
}

std::vector<PeakFeatureVector> read_peak_features_csv(const std::filesystem::path& path,
                                                      std::vector<std::int64_t>* ids) {
    const auto lines = csv::read_lines(path);
    if (lines.empty() || csv::split(lines[0]).size() != PeakFeatureVector::kWidth + 1) {
        throw Error(ErrorKind::HeaderMismatch, path.string() + ": unexpected peak feature header");
    }
    std::vector<PeakFeatureVector> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = csv::split(lines[i]);
        if (f.size() != PeakFeatureVector::kWidth + 1) {
            throw Error(ErrorKind::HeaderMismatch, path.string() + ": short row");
        }
        if (ids) ids->push_back(static_cast<std::int64_t>(csv::to_double(f[0])));
        PeakFeatureVector p;
        double* fields[] = {&p.count,    &p.mean_amp, &p.std_amp,        &p.max_amp,      &p.min_amp,
                            &p.mean_gap, &p.std_gap,  &p.first_idx_frac, &p.last_idx_frac};
        for (std::size_t k = 0; k < PeakFeatureVector::kWidth; ++k) *fields[k] = csv::to_double(f[k + 1]);
        rows.push_back(p);
    }
    return rows;
}

void write_chunk_matrices_csv(const std::filesystem::path& path, std::span<const std::int64_t> ids,
                              std::span<const ChunkMatrix> rows) {
    if (ids.size() != rows.size()) throw Error(ErrorKind::LengthMismatch, "ids and rows differ in length");
    std::string out = "id";
    if (!rows.empty()) {
        for (std::size_t s = 0; s < rows[0].r; ++s) {
            for (std::size_t j = 0; j < rows[0].m; ++j) out += "," + rows[0].stat_names[s] + "_c" + std::to_string(j);
        }
    }
    out += '\n';
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i > 0 && (rows[i].r != rows[0].r || rows[i].m != rows[0].m)) {
            throw Error(ErrorKind::ShapeMismatch, "chunk matrices differ in shape");
        }
        out += std::to_string(ids[i]);
        for (double v : rows[i].values) out += "," + csv::fmt_double(v);
        out += '\n';
    }
    csv::write_text(path, out);
}

std::vector<ChunkMatrix> read_chunk_matrices_csv(const std::filesystem::path& path, std::vector<std::int64_t>* ids) {
    const auto lines = csv::read_lines(path);
    if (lines.empty()) throw Error(ErrorKind::HeaderMismatch, path.string() + ": empty chunk file");
    const auto header = csv::split(lines[0]);
    ChunkMatrix shape;
    // Columns are "<stat>_c<j>", stat-major.
    for (std::size_t c = 1; c < header.size(); ++c) {
        const auto pos = header[c].rfind("_c");
        if (pos == std::string::npos) throw Error(ErrorKind::HeaderMismatch, "bad chunk column " + header[c]);
        const std::string stat = header[c].substr(0, pos);
        if (shape.stat_names.empty() || shape.stat_names.back() != stat) shape.stat_names.push_back(stat);
    }
    shape.r = shape.stat_names.size();
    shape.m = shape.r ? (header.size() - 1) / shape.r : 0;
    if (shape.r * shape.m != header.size() - 1) throw Error(ErrorKind::HeaderMismatch, "ragged chunk header");

    std::vector<ChunkMatrix> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = csv::split(lines[i]);
        if (f.size() != header.size()) throw Error(ErrorKind::HeaderMismatch, path.string() + ": short row");
        if (ids) ids->push_back(static_cast<std::int64_t>(csv::to_double(f[0])));
        ChunkMatrix cm = shape;
        cm.values.resize(cm.r * cm.m);
        for (std::size_t k = 0; k < cm.values.size(); ++k) cm.values[k] = csv::to_double(f[k + 1]);
        rows.push_back(std::move(cm));
    }
    return rows;
}

}  // namespace pdetect::timefeat
