#include "pdetect/pipeline.hpp"

#include "csv.hpp"
#include "pdetect/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace pdetect::pipeline {

namespace fs = std::filesystem;

// --- metrics --------------------------------------------------------------

namespace {

void check_lengths(std::span<const double> scores, std::span<const data::Label> labels) {
    if (scores.size() != labels.size()) {
        throw Error(ErrorKind::LengthMismatch, std::to_string(scores.size()) + " scores but " +
                                                   std::to_string(labels.size()) + " labels");
    }
}

}  // namespace

Confusion confusion(std::span<const double> scores, std::span<const data::Label> labels, double threshold) {
    check_lengths(scores, labels);
    Confusion c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] >= threshold;
        if (labels[i]) {
            ++(predicted ? c.tp : c.fn);
        } else {
            ++(predicted ? c.fp : c.tn);
        }
    }
    return c;
}

double f1_score(const Confusion& c) {
    if (c.tp == 0) return 0.0;
    const double tp = static_cast<double>(c.tp);
    return 2.0 * tp / (2.0 * tp + static_cast<double>(c.fp) + static_cast<double>(c.fn));
}

double mcc(const Confusion& c) {
    const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
    const double tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);
    const double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    if (denom == 0.0) return 0.0;
    return (tp * tn - fp * fn) / std::sqrt(denom);
}

double accuracy(const Confusion& c) {
    if (c.total() == 0) return 0.0;
    return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

double roc_auc(std::span<const double> scores, std::span<const data::Label> labels) {
    check_lengths(scores, labels);
    const auto n = scores.size();
    const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), data::Label{1}));
    if (pos == 0 || pos == n) throw Error(ErrorKind::SingleClass, "AUC needs both classes");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Mid-ranks give tied pairs half credit.
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t t = i; t < j; ++t) {
            if (labels[order[t]]) rank_sum += mid_rank;
        }
        i = j;
    }
    const double p = static_cast<double>(pos), q = static_cast<double>(n - pos);
    return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

Metrics compute_metrics(std::span<const double> scores, std::span<const data::Label> labels, double threshold,
                        bool allow_partial) {
    check_lengths(scores, labels);
    if (scores.empty()) throw Error(ErrorKind::EmptySet, "no scores to evaluate");
    Metrics m;
    m.threshold = threshold;
    m.counts = confusion(scores, labels, threshold);
    m.f1 = f1_score(m.counts);
    m.accuracy = accuracy(m.counts);
    const bool both = m.counts.tp + m.counts.fn > 0 && m.counts.tn + m.counts.fp > 0;
    if (!both) {
        if (!allow_partial) throw Error(ErrorKind::SingleClass, "MCC and AUC need both classes");
        return m;
    }
    m.mcc = mcc(m.counts);
    m.auc = roc_auc(scores, labels);
    return m;
}

std::vector<Metrics> threshold_sweep(std::span<const double> scores, std::span<const data::Label> labels,
                                     std::span<const double> thresholds) {
    std::vector<Metrics> out;
    for (double t : thresholds) out.push_back(compute_metrics(scores, labels, t, true));
    return out;
}

std::string format_metrics_csv(std::span<const MetricsRow> rows) {
    auto cell = [](std::optional<double> v) {
        if (!v) return std::string();
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6f", *v);
        return std::string(buf);
    };
    std::string out = "method,threshold,f1,mcc,auc,accuracy\n";
    for (const auto& r : rows) {
        const auto& m = r.metrics;
        out += r.method + "," + cell(m.threshold) + "," + cell(m.f1) + "," + cell(m.mcc) + "," + cell(m.auc) + "," +
               cell(m.accuracy) + "\n";
    }
    return out;
}

void write_metrics_csv(std::span<const MetricsRow> rows, const fs::path& path) {
    csv::write_text(path, format_metrics_csv(rows));
}

// --- features -------------------------------------------------------------

std::vector<nn::SignalFeatures> extract_features(const data::SignalSet& set, const timefeat::TimeFeatureConfig& time,
                                                 const freqfeat::SparseProjector& projector) {
    std::vector<nn::SignalFeatures> out;
    out.reserve(set.size());
    std::vector<double> x;
    for (const auto& r : set.records) {
        auto tf = timefeat::extract_time_features(r, time);
        x.assign(r.samples.begin(), r.samples.end());
        out.push_back({std::move(tf.chunks), projector.project(x), tf.peaks});
    }
    return out;
}

cluster::FeatureMatrix routing_matrix(std::span<const nn::SignalFeatures> features) {
    cluster::FeatureMatrix m;
    m.reserve(features.size());
    for (const auto& f : features) m.push_back(f.freq.values);
    return m;
}

// --- configuration --------------------------------------------------------

PipelineConfig::PipelineConfig() {
    finetune.epochs = 10;
    set_seed(seed);
}

void PipelineConfig::set_seed(std::uint64_t s) {
    seed = s;
    synth.seed = s;
    kmeans.seed = s;
    train.seed = s;
    finetune.seed = s;
}

// --- end to end -----------------------------------------------------------

namespace {

std::string loss_csv(const std::vector<double>& loss) {
    std::string out = "epoch,loss\n";
    for (std::size_t e = 0; e < loss.size(); ++e) out += std::to_string(e + 1) + "," + csv::fmt_double(loss[e]) + "\n";
    return out;
}

}  // namespace

RunResult run_end_to_end(const data::SignalSet& train, const data::SignalSet& test, const PipelineConfig& cfg,
                         const std::optional<fs::path>& out_dir) {
    const auto train_labels = data::labels_of(train);
    const auto test_labels = data::labels_of(test);
    if (train.empty()) throw Error(ErrorKind::EmptySet, "training set is empty");
    if (test.empty()) throw Error(ErrorKind::EmptySet, "test set is empty");

    RunResult res;
    auto& bundle = res.bundle;
    bundle.time_config = cfg.time;
    bundle.selection = freqfeat::select_top_coefficients(train, cfg.select_fraction, cfg.mi_bins);
    const freqfeat::SparseProjector projector(bundle.selection);
    const auto train_features = extract_features(train, cfg.time, projector);
    const auto test_features = extract_features(test, cfg.time, projector);

    const auto train_routing = routing_matrix(train_features);
    bundle.cluster_model = cluster::kmeans_fit(train_routing, cfg.kmeans);
    const auto train_assign = cluster::assign_all(bundle.cluster_model, train_routing);
    res.train_clusters = cluster::cluster_report(bundle.cluster_model, train_routing, train_labels);

    bundle.scaler = nn::FeatureScaler::fit(train_features);
    const auto train_samples = bundle.scaler.transform(train_features);
    const auto arch = nn::architecture_for(train_features.front(), cfg.arch);

    auto base = nn::train(arch, train_samples, train_labels, cfg.train);
    nn::round_to_float(base.model);
    res.base_loss = base.loss_history;
    bundle.base = std::move(base.model);
    bundle.per_cluster = nn::fine_tune_per_cluster(bundle.base, train_assign, bundle.cluster_model.k, train_samples,
                                                   train_labels, cfg.finetune);
    for (auto& [id, model] : bundle.per_cluster) nn::round_to_float(model);

    res.pooled_scores = nn::predict_pooled(bundle, test_features);
    res.routed_scores = nn::predict(bundle, test_features);
    for (const auto& f : test_features) res.test_assignments.push_back(bundle.route(f));
    res.pooled = compute_metrics(res.pooled_scores, test_labels, cfg.threshold, true);
    res.multitask = compute_metrics(res.routed_scores, test_labels, cfg.threshold, true);

    if (out_dir) {
        std::error_code ec;
        fs::create_directories(*out_dir, ec);
        if (ec) throw Error(ErrorKind::IoFailure, out_dir->string() + ": " + ec.message());
        nn::save_bundle(bundle, *out_dir / "bundle");
        nn::save_checkpoint(bundle.base, *out_dir / "bundle" / "base", {cfg.train.seed, cfg.train, res.base_loss});
        freqfeat::mi_report(bundle.selection, *out_dir / "mi_report.csv");
        cluster::write_report_csv(res.train_clusters, *out_dir / "cluster_report.csv");
        csv::write_text(*out_dir / "train_loss.csv", loss_csv(res.base_loss));

        std::string pred = "id,label,cluster,pooled,multitask\n";
        for (std::size_t i = 0; i < test.size(); ++i) {
            pred += std::to_string(test.records[i].id) + "," + std::to_string(int(test_labels[i])) + "," +
                    std::to_string(res.test_assignments[i]) + "," + csv::fmt_double(res.pooled_scores[i]) + "," +
                    csv::fmt_double(res.routed_scores[i]) + "\n";
        }
        csv::write_text(*out_dir / "predictions.csv", pred);
        const std::vector<MetricsRow> rows{{"pooled", res.pooled}, {"multitask", res.multitask}};
        write_metrics_csv(rows, *out_dir / "metrics.csv");
    }
    return res;
}

// --- timing ---------------------------------------------------------------

const StageTiming* TimingReport::find(const std::string& name) const {
    for (const auto& s : stages) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

TimingReport benchmark_features(const data::SignalSet& set, std::size_t repetitions,
                                const timefeat::TimeFeatureConfig& time, const freqfeat::SpectrumSelection& selection) {
    if (set.empty()) throw Error(ErrorKind::EmptySet, "cannot benchmark an empty set");
    if (repetitions == 0) throw Error(ErrorKind::InvalidConfig, "repetitions must be at least 1");
    std::vector<std::vector<double>> xs;
    for (const auto& r : set.records) xs.emplace_back(r.samples.begin(), r.samples.end());
    const double rate = set.sample_rate_hz;
    const double cutoff = time.resolved_cutoff(rate, set.T);
    const std::size_t neighborhood = time.resolved_neighborhood(rate);
    const freqfeat::SparseProjector projector(selection);

    volatile double sink = 0.0;
    auto timed = [&](const char* name, auto&& stage) {
        const auto start = std::chrono::steady_clock::now();
        for (std::size_t rep = 0; rep < repetitions; ++rep) {
            for (const auto& x : xs) sink = sink + stage(x);
        }
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
        return StageTiming{name, elapsed.count() / static_cast<double>(repetitions * xs.size()), repetitions};
    };

    TimingReport report;
    report.stages.push_back(timed("peak_extraction", [&](const std::vector<double>& x) {
        const auto filtered = timefeat::high_pass(x, cutoff, rate);
        const double threshold = time.threshold_factor * timefeat::population_std(filtered.samples);
        const auto peaks = timefeat::extract_peaks(filtered, neighborhood, threshold);
        return timefeat::peak_features(peaks, x.size()).count;
    }));
    report.stages.push_back(timed("chunk_statistics", [&](const std::vector<double>& x) {
        return timefeat::chunk_statistics(x, time.chunks).values.front();
    }));
    report.stages.push_back(
        timed("mi_selected_dft", [&](const std::vector<double>& x) { return projector.project(x).values.front(); }));
    report.stages.push_back(timed("full_fft", [&](const std::vector<double>& x) {
        return freqfeat::dft_magnitudes(x, rate).magnitudes.front();
    }));
    return report;
}

void write_timing_csv(const TimingReport& report, const fs::path& path) {
    std::string out = "stage,mean_seconds,runs\n";
    for (const auto& s : report.stages) {
        out += s.name + "," + csv::fmt_double(s.mean_seconds) + "," + std::to_string(s.runs) + "\n";
    }
    csv::write_text(path, out);
}

}  // namespace pdetect::pipeline
