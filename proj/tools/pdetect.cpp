// Command-line front end: one subcommand per pipeline stage.

#include "pdetect/cluster.hpp"
#include "pdetect/data.hpp"
#include "pdetect/error.hpp"
#include "pdetect/freqfeat.hpp"
#include "pdetect/nn/bundle.hpp"
#include "pdetect/pipeline.hpp"
#include "pdetect/timefeat.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace pdetect;

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    std::string config;
};

pipeline::PipelineConfig resolve_config(const Globals& g) {
    pipeline::PipelineConfig cfg = g.config.empty() ? pipeline::PipelineConfig{} : pipeline::load_config(g.config);
    if (g.seed) cfg.set_seed(*g.seed);
    return cfg;
}

std::vector<std::int64_t> ids_of(const data::SignalSet& set) {
    std::vector<std::int64_t> ids;
    for (const auto& r : set.records) ids.push_back(r.id);
    return ids;
}

void require_labels(const data::SignalSet& set, const std::string& path) {
    if (!set.labeled) throw Error(ErrorKind::LabelMissing, path + " has no labels");
}

void write_freq_csv(const fs::path& path, const data::SignalSet& set, const freqfeat::SpectrumSelection& sel,
                    const std::vector<nn::SignalFeatures>& features) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::IoFailure, path.string());
    out << "id";
    for (auto b : sel.selected_bins) out << ",bin_" << b;
    out << "\n";
    char buf[32];
    for (std::size_t i = 0; i < features.size(); ++i) {
        out << set.records[i].id;
        for (double v : features[i].freq.values) {
            std::snprintf(buf, sizeof buf, ",%.17g", v);
            out << buf;
        }
        out << "\n";
    }
}

void print_metrics(const std::vector<pipeline::MetricsRow>& rows) {
    std::cout << pipeline::format_metrics_csv(rows);
}

// --- subcommands ----------------------------------------------------------

struct SynthArgs {
    std::optional<std::size_t> n;
    std::optional<double> pd_rate;
    std::optional<std::size_t> T;
    std::optional<double> rate;
    std::string out;
};

void cmd_synth(const Globals& g, const SynthArgs& a) {
    auto cfg = resolve_config(g).synth;
    if (a.n) cfg.n_signals = *a.n;
    if (a.pd_rate) cfg.pd_rate = *a.pd_rate;
    if (a.T) cfg.T = *a.T;
    if (a.rate) cfg.sample_rate_hz = *a.rate;
    const auto set = data::generate_synthetic(cfg);
    data::save_signal_set(set, a.out);
    std::cerr << "wrote " << set.size() << " signals (T=" << set.T << ") to " << a.out << "\n";
}

struct PreprocessArgs {
    std::string in;
    std::string out_dir;
    std::string selection;
};

void cmd_preprocess(const Globals& g, const PreprocessArgs& a) {
    const auto cfg = resolve_config(g);
    const auto set = data::load_signal_set(a.in);
    fs::create_directories(a.out_dir);
    std::vector<timefeat::PeakFeatureVector> peaks;
    std::vector<timefeat::ChunkMatrix> chunks;
    for (const auto& r : set.records) {
        auto tf = timefeat::extract_time_features(r, cfg.time);
        peaks.push_back(tf.peaks);
        chunks.push_back(std::move(tf.chunks));
    }
    const auto ids = ids_of(set);
    timefeat::write_peak_features_csv(fs::path(a.out_dir) / "peaks.csv", ids, peaks);
    timefeat::write_chunk_matrices_csv(fs::path(a.out_dir) / "chunks.csv", ids, chunks);
    if (!a.selection.empty()) {
        const auto sel = freqfeat::load_selection(a.selection);
        const freqfeat::SparseProjector projector(sel);
        write_freq_csv(fs::path(a.out_dir) / "freq.csv", set, sel, pipeline::extract_features(set, cfg.time, projector));
    }
    std::cerr << "features for " << set.size() << " signals in " << a.out_dir << "\n";
}

struct SelectArgs {
    std::string in;
    std::string out;
    std::string report;
    std::optional<double> fraction;
    std::optional<std::size_t> bins;
};

void cmd_select(const Globals& g, const SelectArgs& a) {
    const auto cfg = resolve_config(g);
    const auto set = data::load_signal_set(a.in);
    require_labels(set, a.in);
    const auto sel = freqfeat::select_top_coefficients(set, a.fraction.value_or(cfg.select_fraction),
                                                       a.bins.value_or(cfg.mi_bins));
    freqfeat::save_selection(sel, a.out);
    if (!a.report.empty()) freqfeat::mi_report(sel, a.report);
    std::cerr << "selected " << sel.selected_bins.size() << " of " << sel.n_bins_total << " bins\n";
}

struct ClusterArgs {
    std::string in;
    std::string selection;
    std::string out;
    std::string report;
    std::string sweep_out;
    std::optional<std::size_t> k;
    std::vector<std::size_t> sweep;
};

void cmd_cluster(const Globals& g, const ClusterArgs& a) {
    const auto cfg = resolve_config(g);
    const auto set = data::load_signal_set(a.in);
    const auto sel = freqfeat::load_selection(a.selection);
    const freqfeat::SparseProjector projector(sel);
    cluster::FeatureMatrix features;
    std::vector<double> x;
    for (const auto& r : set.records) {
        x.assign(r.samples.begin(), r.samples.end());
        features.push_back(projector.project(x).values);
    }
    auto opts = cfg.kmeans;
    if (a.k) opts.k = *a.k;
    if (!a.sweep.empty()) {
        const auto sweep = cluster::sweep_k(features, a.sweep, opts.seed, opts.max_iter, opts.tol);
        if (!a.sweep_out.empty()) cluster::write_sweep_csv(sweep, a.sweep_out);
        for (const auto& [k, s] : sweep) std::cout << "k=" << k << " silhouette=" << s << "\n";
    }
    const auto model = cluster::kmeans_fit(features, opts);
    if (!a.out.empty()) cluster::save_model(model, a.out);
    if (!a.report.empty()) {
        require_labels(set, a.in);
        cluster::write_report_csv(cluster::cluster_report(model, features, data::labels_of(set)), a.report);
    }
    std::cerr << "k=" << model.k << " inertia=" << model.inertia << "\n";
}

struct TrainArgs {
    std::string in;
    std::string out;
    std::string selection;
    std::string cluster_model;
    std::optional<std::size_t> epochs;
    std::optional<double> lr;
    std::optional<std::size_t> batch;
};

void cmd_train(const Globals& g, const TrainArgs& a) {
    const auto cfg = resolve_config(g);
    const auto set = data::load_signal_set(a.in);
    require_labels(set, a.in);
    const auto labels = data::labels_of(set);

    nn::ModelBundle bundle;
    bundle.time_config = cfg.time;
    bundle.selection = a.selection.empty()
                           ? freqfeat::select_top_coefficients(set, cfg.select_fraction, cfg.mi_bins)
                           : freqfeat::load_selection(a.selection);
    const freqfeat::SparseProjector projector(bundle.selection);
    const auto features = pipeline::extract_features(set, cfg.time, projector);
    bundle.cluster_model = a.cluster_model.empty()
                               ? cluster::kmeans_fit(pipeline::routing_matrix(features), cfg.kmeans)
                               : cluster::load_model(a.cluster_model);
    bundle.scaler = nn::FeatureScaler::fit(features);
    const auto samples = bundle.scaler.transform(features);

    auto tc = cfg.train;
    if (a.epochs) tc.epochs = *a.epochs;
    if (a.lr) tc.lr = *a.lr;
    if (a.batch) tc.batch_size = *a.batch;
    auto result = nn::train(nn::architecture_for(features.front(), cfg.arch), samples, labels, tc);
    nn::round_to_float(result.model);
    bundle.base = std::move(result.model);
    nn::save_bundle(bundle, a.out);
    nn::save_checkpoint(bundle.base, fs::path(a.out) / "base", {tc.seed, tc, result.loss_history});
    if (!result.loss_history.empty()) {
        std::cerr << "final training loss " << result.loss_history.back() << " after " << tc.epochs << " epochs\n";
    }
}

struct FinetuneArgs {
    std::string in;
    std::string bundle;
    std::optional<std::size_t> epochs;
};

void cmd_finetune(const Globals& g, const FinetuneArgs& a) {
    const auto cfg = resolve_config(g);
    const auto set = data::load_signal_set(a.in);
    require_labels(set, a.in);
    auto bundle = nn::load_bundle(a.bundle);
    const freqfeat::SparseProjector projector(bundle.selection);
    const auto features = pipeline::extract_features(set, bundle.time_config, projector);
    std::vector<std::size_t> assign;
    for (const auto& f : features) assign.push_back(bundle.route(f));
    auto tc = cfg.finetune;
    if (a.epochs) tc.epochs = *a.epochs;
    bundle.per_cluster = nn::fine_tune_per_cluster(bundle.base, assign, bundle.cluster_model.k,
                                                   bundle.scaler.transform(features), data::labels_of(set), tc);
    for (std::size_t id = 0; id < bundle.cluster_model.k; ++id) {
        fs::remove_all(fs::path(a.bundle) / ("cluster_" + std::to_string(id)));
    }
    for (const auto& [id, model] : bundle.per_cluster) {
        nn::save_checkpoint(model, fs::path(a.bundle) / ("cluster_" + std::to_string(id)), {tc.seed + id, tc, {}});
    }
    std::cerr << "fine-tuned " << bundle.per_cluster.size() << " of " << bundle.cluster_model.k << " clusters\n";
}

struct EvalArgs {
    std::string in;
    std::string bundle;
    std::string out;
    std::string predictions;
    std::optional<double> threshold;
    bool sweep = false;
};

void cmd_eval(const Globals& g, const EvalArgs& a) {
    const auto cfg = resolve_config(g);
    const auto set = data::load_signal_set(a.in);
    require_labels(set, a.in);
    const auto labels = data::labels_of(set);
    const auto bundle = nn::load_bundle(a.bundle);
    const freqfeat::SparseProjector projector(bundle.selection);
    const auto features = pipeline::extract_features(set, bundle.time_config, projector);
    const double thr = a.threshold.value_or(cfg.threshold);
    const auto pooled = nn::predict_pooled(bundle, features);
    const auto routed = nn::predict(bundle, features);
    const std::vector<pipeline::MetricsRow> rows{{"pooled", pipeline::compute_metrics(pooled, labels, thr, true)},
                                                 {"multitask", pipeline::compute_metrics(routed, labels, thr, true)}};
    if (!a.out.empty()) pipeline::write_metrics_csv(rows, a.out);
    print_metrics(rows);
    if (a.sweep) {
        std::vector<double> thresholds;
        for (int t = 1; t < 20; ++t) thresholds.push_back(t / 20.0);
        std::vector<pipeline::MetricsRow> sweep;
        for (const auto& m : pipeline::threshold_sweep(routed, labels, thresholds)) sweep.push_back({"multitask", m});
        print_metrics(sweep);
    }
    if (!a.predictions.empty()) {
        std::ofstream out(a.predictions);
        out << "id,label,cluster,pooled,multitask\n";
        for (std::size_t i = 0; i < features.size(); ++i) {
            out << set.records[i].id << "," << int(labels[i]) << "," << bundle.route(features[i]) << "," << pooled[i]
                << "," << routed[i] << "\n";
        }
        if (!out) throw Error(ErrorKind::IoFailure, a.predictions);
    }
}

struct BenchArgs {
    std::string in;
    std::string selection;
    std::string out;
    std::size_t reps = 5;
};

void cmd_bench(const Globals& g, const BenchArgs& a) {
    const auto cfg = resolve_config(g);
    const auto set = a.in.empty() ? data::generate_synthetic(cfg.synth) : data::load_signal_set(a.in);
    freqfeat::SpectrumSelection sel;
    if (!a.selection.empty()) {
        sel = freqfeat::load_selection(a.selection);
    } else {
        require_labels(set, a.in.empty() ? "synthetic set" : a.in);
        sel = freqfeat::select_top_coefficients(set, cfg.select_fraction, cfg.mi_bins);
    }
    const auto report = pipeline::benchmark_features(set, a.reps, cfg.time, sel);
    if (!a.out.empty()) pipeline::write_timing_csv(report, a.out);
    std::printf("stage,mean_seconds,runs\n");
    for (const auto& s : report.stages) std::printf("%s,%.9f,%zu\n", s.name.c_str(), s.mean_seconds, s.runs);
}

struct RunArgs {
    std::string train;
    std::string test;
    std::string out;
};

void cmd_run(const Globals& g, const RunArgs& a) {
    const auto cfg = resolve_config(g);
    data::SignalSet train, test;
    if (a.train.empty()) {
        std::tie(train, test) = data::stratified_split(data::generate_synthetic(cfg.synth), cfg.test_fraction, cfg.seed);
    } else if (a.test.empty()) {
        std::tie(train, test) = data::stratified_split(data::load_signal_set(a.train), cfg.test_fraction, cfg.seed);
    } else {
        train = data::load_signal_set(a.train);
        test = data::load_signal_set(a.test);
    }
    require_labels(train, "training set");
    require_labels(test, "test set");
    const auto res = pipeline::run_end_to_end(train, test, cfg, fs::path(a.out));
    print_metrics({{"pooled", res.pooled}, {"multitask", res.multitask}});
}

struct ReportArgs {
    std::string bundle;
    std::string in;
    std::string out;
    std::size_t bands = 10;
};

void cmd_report(const Globals&, const ReportArgs& a) {
    const auto bundle = nn::load_bundle(a.bundle);
    const auto& sel = bundle.selection;
    std::printf("selection: %zu of %zu bins, T=%zu, %.6g Hz per bin\n", sel.selected_bins.size(), sel.n_bins_total,
                sel.T, sel.bin_hz());
    const auto hist = freqfeat::band_histogram(sel, a.bands);
    for (std::size_t b = 0; b < hist.size(); ++b) {
        const double width = sel.sample_rate_hz / 2.0 / static_cast<double>(hist.size());
        std::printf("  band %8.4g-%-8.4g Hz: %zu\n", width * static_cast<double>(b), width * static_cast<double>(b + 1),
                    hist[b]);
    }
    std::printf("model: %zu parameters, hidden %zu, %zu frequency inputs\n", bundle.base.parameter_count(),
                bundle.base.arch.hidden, bundle.base.arch.freq_bins);
    std::printf("clusters: k=%zu, fine-tuned:", bundle.cluster_model.k);
    for (const auto& [id, m] : bundle.per_cluster) std::printf(" %zu", id);
    std::printf("\n");
    if (a.in.empty()) return;

    const auto set = data::load_signal_set(a.in);
    require_labels(set, a.in);
    const freqfeat::SparseProjector projector(sel);
    const auto features = pipeline::extract_features(set, bundle.time_config, projector);
    const auto report =
        cluster::cluster_report(bundle.cluster_model, pipeline::routing_matrix(features), data::labels_of(set));
    std::printf("cluster,size,positive_count,positive_rate\n");
    for (const auto& c : report.clusters) std::printf("%zu,%zu,%zu,%.6f\n", c.id, c.size, c.positive_count, c.positive_rate);
    if (!a.out.empty()) cluster::write_report_csv(report, a.out);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Partial-discharge detection pipeline"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "Seed for every random stage")->expected(1);
    app.add_option("--config", g.config, "TOML or JSON configuration file")->check(CLI::ExistingFile);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a labeled synthetic signal set");
    s->add_option("--n", synth.n, "Number of signals");
    s->add_option("--pd-rate", synth.pd_rate, "Fraction of positive signals");
    s->add_option("--T", synth.T, "Samples per signal");
    s->add_option("--sample-rate", synth.rate, "Sampling rate in Hz");
    s->add_option("--out", synth.out, "Output set (.gpd binary or .csv)")->required();

    PreprocessArgs pre;
    auto* p = app.add_subcommand("preprocess", "Extract peak, chunk and (optionally) spectral features");
    p->add_option("--in", pre.in, "Signal set")->required();
    p->add_option("--out", pre.out_dir, "Output directory")->required();
    p->add_option("--selection", pre.selection, "Selection JSON for spectral features");

    SelectArgs sel;
    auto* se = app.add_subcommand("select", "Rank DFT bins by mutual information and keep the top fraction");
    se->add_option("--in", sel.in, "Labeled signal set")->required();
    se->add_option("--out", sel.out, "Selection JSON")->required();
    se->add_option("--report", sel.report, "Full MI ranking CSV");
    se->add_option("--fraction", sel.fraction, "Fraction of bins to keep");
    se->add_option("--bins", sel.bins, "Quantile bins for MI estimation");

    ClusterArgs cl;
    auto* c = app.add_subcommand("cluster", "Fit k-means on selected spectral magnitudes");
    c->add_option("--in", cl.in, "Signal set")->required();
    c->add_option("--selection", cl.selection, "Selection JSON")->required();
    c->add_option("--out", cl.out, "Cluster model JSON");
    c->add_option("--report", cl.report, "Per-cluster size and positive rate CSV");
    c->add_option("--k", cl.k, "Number of clusters");
    c->add_option("--sweep", cl.sweep, "Silhouette sweep over these k values")->delimiter(',');
    c->add_option("--sweep-out", cl.sweep_out, "Sweep CSV");

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train the base classifier and write a bundle");
    t->add_option("--in", tr.in, "Labeled training set")->required();
    t->add_option("--out", tr.out, "Bundle directory")->required();
    t->add_option("--selection", tr.selection, "Selection JSON (computed from --in if absent)");
    t->add_option("--cluster-model", tr.cluster_model, "Cluster model JSON (fitted on --in if absent)");
    t->add_option("--epochs", tr.epochs, "Training epochs");
    t->add_option("--lr", tr.lr, "Adam learning rate");
    t->add_option("--batch-size", tr.batch, "Mini-batch size");

    FinetuneArgs ft;
    auto* f = app.add_subcommand("finetune", "Fine-tune a copy of the base model per cluster");
    f->add_option("--in", ft.in, "Labeled training set")->required();
    f->add_option("--bundle", ft.bundle, "Bundle directory, updated in place")->required();
    f->add_option("--epochs", ft.epochs, "Fine-tuning epochs");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Score a labeled set with a bundle");
    e->add_option("--in", ev.in, "Labeled signal set")->required();
    e->add_option("--bundle", ev.bundle, "Bundle directory")->required();
    e->add_option("--out", ev.out, "Metrics CSV");
    e->add_option("--predictions", ev.predictions, "Per-signal scores CSV");
    e->add_option("--threshold", ev.threshold, "Decision threshold");
    e->add_flag("--sweep", ev.sweep, "Also print metrics over a threshold grid");

    BenchArgs be;
    auto* b = app.add_subcommand("bench", "Time the feature stages");
    b->add_option("--in", be.in, "Signal set (synthetic defaults if absent)");
    b->add_option("--selection", be.selection, "Selection JSON");
    b->add_option("--reps", be.reps, "Repetitions")->check(CLI::PositiveNumber);
    b->add_option("--out", be.out, "Timing CSV");

    RunArgs ru;
    auto* r = app.add_subcommand("run", "Whole pipeline: split, select, cluster, train, fine-tune, evaluate");
    r->add_option("--train", ru.train, "Training set (synthetic if absent; split when --test is absent)");
    r->add_option("--test", ru.test, "Test set");
    r->add_option("--out", ru.out, "Artifact directory")->required();

    ReportArgs rep;
    auto* rp = app.add_subcommand("report", "Summarize a bundle, optionally with cluster statistics of a set");
    rp->add_option("--bundle", rep.bundle, "Bundle directory")->required();
    rp->add_option("--in", rep.in, "Labeled signal set");
    rp->add_option("--out", rep.out, "Cluster report CSV");
    rp->add_option("--bands", rep.bands, "Bands in the selection histogram")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*s) cmd_synth(g, synth);
        else if (*p) cmd_preprocess(g, pre);
        else if (*se) cmd_select(g, sel);
        else if (*c) cmd_cluster(g, cl);
        else if (*t) cmd_train(g, tr);
        else if (*f) cmd_finetune(g, ft);
        else if (*e) cmd_eval(g, ev);
        else if (*b) cmd_bench(g, be);
        else if (*r) cmd_run(g, ru);
        else if (*rp) cmd_report(g, rep);
    } catch (const Error& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    }
    return 0;
}
