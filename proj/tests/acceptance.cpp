// Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero if any fail.
#include "pdetect/error.hpp"
#include "pdetect/pipeline.hpp"
#include "support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>

using namespace pdetect;
using data::Label;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome dft_accuracy() {
    const auto t0 = Clock::now();
    testsupport::Gen g(1);
    double worst_full = 0.0, worst_sparse = 0.0;
    for (std::size_t T : {4, 16, 64}) {
        for (int rep = 0; rep < 20; ++rep) {
            const auto x = g.normals(T, g.uniform(0.1, 10.0));
            const auto want = testsupport::direct_dft_magnitudes(x);
            const auto got = freqfeat::dft_magnitudes(x).magnitudes;
            double scale = *std::max_element(want.begin(), want.end());
            for (std::size_t k = 0; k < want.size(); ++k) {
                worst_full = std::max(worst_full, testsupport::rel_err(got[k], want[k], 1e-3 * scale));
            }
            freqfeat::SpectrumSelection sel;
            sel.T = T;
            sel.n_bins_total = T / 2 + 1;
            sel.mi_scores.assign(sel.n_bins_total, 0.0);
            for (std::size_t k = 0; k < sel.n_bins_total; ++k) {
                if (g.coin(0.5)) sel.selected_bins.push_back(k);
            }
            if (sel.selected_bins.empty()) sel.selected_bins.push_back(0);
            const auto direct = freqfeat::sparse_project(x, sel).values;
            const auto fast = freqfeat::SparseProjector(sel).project(x).values;
            for (std::size_t j = 0; j < sel.selected_bins.size(); ++j) {
                const double full = got[sel.selected_bins[j]];
                worst_sparse = std::max(worst_sparse, testsupport::rel_err(direct[j], full, 1e-3 * scale));
                worst_sparse = std::max(worst_sparse, testsupport::rel_err(fast[j], full, 1e-3 * scale));
            }
        }
    }
    const double t = seconds_since(t0);
    return {worst_full <= 1e-9 && worst_sparse <= 1e-9 && t < 1.0,
            fmt("dft rel err %.3g, sparse rel err %.3g (tol 1e-9), %.3f s (limit 1 s)", worst_full, worst_sparse, t)};
}

Outcome gradient_check() {
    const auto t0 = Clock::now();
    const auto arch = testsupport::tiny_architecture();
    double worst = 0.0;
    std::size_t checked = 0;
    const std::size_t seeds = 10;
    for (std::uint64_t seed = 0; seed < seeds; ++seed) {
        testsupport::Gen g(1000 + seed);
        auto model = nn::init_model(arch, seed);
        testsupport::scale_parameters(model, 2.0);
        std::vector<nn::Sample> batch;
        std::vector<Label> labels;
        for (int i = 0; i < 3; ++i) {
            batch.push_back(testsupport::random_sample(g, arch, 4));
            labels.push_back(static_cast<Label>(i % 2));
        }
        const auto r = testsupport::gradient_check(model, batch, labels, {1.7, 0.6}, 1e-4);
        worst = std::max(worst, r.max_rel_err);
        checked += r.checked;
    }
    const double t = seconds_since(t0);
    return {worst <= 1e-4 && t < 30.0,
            fmt("%zu seeds, %zu parameters, max rel err %.3g (tol 1e-4), %.2f s (limit 30 s)", seeds, checked, worst, t)};
}

Outcome metric_oracles() {
    std::vector<double> s;
    std::vector<Label> y;
    auto add = [&](int n, double score, Label label) {
        for (int i = 0; i < n; ++i) {
            s.push_back(score);
            y.push_back(label);
        }
    };
    add(2, 0.9, 1);
    add(1, 0.8, 0);
    add(1, 0.2, 1);
    add(6, 0.1, 0);
    const auto m = pipeline::compute_metrics(s, y);
    const double f1_err = std::abs(m.f1 - 2.0 / 3.0);
    const double mcc_err = std::abs(*m.mcc - 11.0 / 21.0);
    const double tie = pipeline::roc_auc(std::vector<double>(8, 0.4), std::vector<Label>{1, 0, 1, 0, 0, 0, 1, 0});
    const double sil = cluster::silhouette_mean(cluster::FeatureMatrix{{0.0}, {1.0}, {10.0}, {11.0}},
                                                std::vector<std::size_t>{0, 0, 1, 1});
    const double sil_err = std::abs(sil - 0.899749);
    return {f1_err <= 1e-12 && mcc_err <= 1e-12 && tie == 0.5 && sil_err <= 1e-6,
            fmt("f1 err %.3g, mcc err %.3g (tol 1e-12), tied auc %.6f, silhouette %.7f (tol 1e-6)", f1_err, mcc_err,
                tie, sil)};
}

Outcome mutual_information() {
    const std::vector<Label> y{0, 1, 1, 0, 1, 0, 0, 1, 1, 0};
    const std::vector<double> same(y.begin(), y.end());
    const double dep = freqfeat::mutual_information(same, y, 2);
    const double indep = freqfeat::mutual_information(std::vector<double>(y.size(), 1.5), y, 10);
    // A feature whose four value levels each hold the classes in equal measure.
    const std::vector<Label> y2{0, 1, 0, 1, 0, 1, 0, 1};
    const double spread = freqfeat::mutual_information(std::vector<double>{1, 1, 2, 2, 3, 3, 4, 4}, y2, 4);
    testsupport::Gen g(3);
    bool invariant = true;
    for (int rep = 0; rep < 20; ++rep) {
        auto x = g.normals(200);
        const auto lab = g.labels(200, 0.3);
        const double base = freqfeat::mutual_information(x, lab, 10);
        for (auto& v : x) v = std::exp(2.0 * v) + 5.0;
        invariant = invariant && freqfeat::mutual_information(x, lab, 10) == base;
    }
    const double err = std::abs(dep - std::log(2.0));
    return {err <= 1e-9 && indep == 0.0 && std::abs(spread) <= 1e-12 && invariant,
            fmt("dependent %.12f (ln2 err %.3g, tol 1e-9), constant %.3g, balanced levels %.3g, monotone invariant %s",
                dep, err, indep, spread, invariant ? "yes" : "no")};
}

Outcome peak_brute_force() {
    testsupport::Gen g(5);
    std::size_t mismatches = 0;
    for (int rep = 0; rep < 100; ++rep) {
        const auto x = g.spiky_signal(g.index(1, 2000));
        const std::size_t nb = g.index(1, 15);
        const double thr = g.uniform(0.0, 1.5);
        timefeat::FilteredSignal f;
        f.samples = x;
        const auto got = timefeat::extract_peaks(f, nb, thr);
        const auto want = testsupport::brute_force_peaks(x, nb, thr);
        mismatches += got.indices != want.indices || got.amplitudes != want.amplitudes;
    }
    return {mismatches == 0, fmt("%zu of 100 random signals differ (exact match required)", mismatches)};
}

struct EndToEnd {
    pipeline::RunResult result;
    double seconds = 0.0;
};

EndToEnd end_to_end(const std::filesystem::path& out) {
    pipeline::PipelineConfig cfg;
    cfg.set_seed(7);
    cfg.synth.n_signals = 500;
    cfg.synth.T = 8000;
    cfg.synth.pd_rate = 0.15;
    const auto t0 = Clock::now();
    const auto set = data::generate_synthetic(cfg.synth);
    const auto [train, test] = data::stratified_split(set, 0.2, cfg.seed);
    if (train.size() != 400 || test.size() != 100) throw Error(ErrorKind::InvalidConfig, "unexpected split sizes");
    EndToEnd e{pipeline::run_end_to_end(train, test, cfg, out), 0.0};
    e.seconds = seconds_since(t0);
    return e;
}

Outcome end_to_end_quality(const EndToEnd& e) {
    const auto& m = e.result.multitask;
    const double auc = m.auc.value_or(0.0);
    return {m.f1 >= 0.9 && auc >= 0.95 && e.seconds < 600.0,
            fmt("400 train / 100 test: f1 %.4f (min 0.9), auc %.4f (min 0.95), %.1f s (limit 600 s)", m.f1, auc,
                e.seconds)};
}

Outcome decoy_cluster() {
    pipeline::PipelineConfig cfg;
    cfg.set_seed(11);
    cfg.synth.n_signals = 500;
    cfg.synth.pd_rate = 0.15;
    data::NoiseProfile decoy;
    decoy.kind = data::NoiseKind::RandomPulse;
    decoy.amplitude = 0.2;
    decoy.freq_hz = 3.2e5;  // inside the discharge band
    decoy.pulses = 10;
    decoy.apply_rate = 0.25;
    cfg.synth.noise_profiles.push_back(decoy);
    const auto gen = data::generate_synthetic_with_truth(cfg.synth);
    const auto [train, test] = data::stratified_split(gen.set, 0.2, cfg.seed);
    const auto r = pipeline::run_end_to_end(train, test, cfg);

    const std::size_t k = r.bundle.cluster_model.k;
    std::vector<std::size_t> decoys(k, 0);
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto id = static_cast<std::size_t>(test.records[i].id);
        decoys[r.test_assignments[i]] += gen.truth.profile_applied[id].back();
    }
    const auto c = static_cast<std::size_t>(std::max_element(decoys.begin(), decoys.end()) - decoys.begin());
    double before = 0.0, after = 0.0;
    std::size_t negatives = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        if (r.test_assignments[i] != c || *test.records[i].label) continue;
        before += r.pooled_scores[i];
        after += r.routed_scores[i];
        ++negatives;
    }
    if (negatives == 0) return {false, "decoy cluster holds no negatives"};
    before /= static_cast<double>(negatives);
    after /= static_cast<double>(negatives);
    return {after < before && r.multitask.f1 >= r.pooled.f1,
            fmt("cluster %zu (%zu decoys, %zu negatives): mean p %.4f -> %.4f; f1 pooled %.4f, routed %.4f", c,
                decoys[c], negatives, before, after, r.pooled.f1, r.multitask.f1)};
}

Outcome timing_order() {
    data::SynthConfig sc;
    sc.n_signals = 40;
    sc.pd_rate = 0.25;
    sc.seed = 3;
    const auto set = data::generate_synthetic(sc);
    const auto sel = freqfeat::select_top_coefficients(set, 0.01, 10);
    const auto rep = pipeline::benchmark_features(set, 5, timefeat::TimeFeatureConfig{}, sel);
    const double peaks = rep.find("peak_extraction")->mean_seconds;
    const double chunks = rep.find("chunk_statistics")->mean_seconds;
    const double sparse = rep.find("mi_selected_dft")->mean_seconds;
    const double fft = rep.find("full_fft")->mean_seconds;
    return {sparse < chunks && chunks < peaks,
            fmt("per signal at T=8000: sparse %.1f us, chunk stats %.1f us, peaks %.1f us (full fft %.1f us); "
                "required sparse < chunk < peaks",
                sparse * 1e6, chunks * 1e6, peaks * 1e6, fft * 1e6)};
}

Outcome report_partition() {
    const std::vector<std::size_t> sizes{5127, 1431, 994, 914, 246};
    const std::vector<std::size_t> positives{56, 71, 124, 174, 100};
    cluster::ClusterModel m;
    m.k = sizes.size();
    m.input_dim = 1;
    m.kept_dims = {0};
    m.mean = {0.0};
    m.stddev = {1.0};
    cluster::FeatureMatrix x;
    std::vector<Label> y;
    for (std::size_t c = 0; c < sizes.size(); ++c) {
        m.centroids.push_back({static_cast<double>(c)});
        for (std::size_t i = 0; i < sizes[c]; ++i) {
            x.push_back({static_cast<double>(c)});
            y.push_back(i < positives[c] ? 1 : 0);
        }
    }
    const auto r = cluster::cluster_report(m, x, y);
    std::size_t n = 0, p = 0;
    bool rows_match = r.clusters.size() == sizes.size();
    for (const auto& s : r.clusters) {
        n += s.size;
        p += s.positive_count;
        rows_match = rows_match && s.size == sizes[s.id] && s.positive_count == positives[s.id];
    }
    return {n == 8712 && p == 525 && rows_match,
            fmt("sizes sum %zu (want 8712), positives sum %zu (want 525), per-cluster rows %s", n, p,
                rows_match ? "match" : "differ")};
}

Outcome determinism(const std::filesystem::path& a, const std::filesystem::path& b) {
    const auto x = slurp(a / "metrics.csv");
    const auto y = slurp(b / "metrics.csv");
    return {!x.empty() && x == y, fmt("metrics.csv %zu bytes vs %zu bytes, %s", x.size(), y.size(),
                                      x == y ? "identical" : "different")};
}

}  // namespace

int main(int argc, char** argv) {
    const std::filesystem::path work = argc > 1 ? argv[1] : "acceptance_work";
    std::filesystem::remove_all(work);
    std::filesystem::create_directories(work);

    int failed = 0;
    auto report = [&](int id, const char* name, const std::function<Outcome()>& fn) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
        std::fflush(stdout);
    };

    report(1, "dft and sparse projection accuracy", dft_accuracy);
    report(2, "gradient check against central differences", gradient_check);
    report(3, "metric oracles", metric_oracles);
    report(4, "mutual information", mutual_information);
    report(5, "peak extraction vs brute force", peak_brute_force);

    std::optional<EndToEnd> first, second;
    report(6, "end-to-end quality", [&] {
        first = end_to_end(work / "run_a");
        return end_to_end_quality(*first);
    });
    report(7, "decoy cluster fine-tuning", decoy_cluster);
    report(8, "timing order", timing_order);
    report(9, "cluster report partitions totals", report_partition);
    report(10, "identical seeds give identical metrics", [&] {
        second = end_to_end(work / "run_b");
        return determinism(work / "run_a", work / "run_b");
    });

    std::printf("%d of 10 criteria failed\n", failed);
    return failed == 0 ? 0 : 1;
}
