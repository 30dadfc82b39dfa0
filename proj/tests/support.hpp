#pragma once

// Independent reference implementations and random generators shared by the unit
// tests and the acceptance binary. Nothing here calls into the code under test
// except to read plain data structures.

#include "pdetect/data.hpp"
#include "pdetect/nn/model.hpp"
#include "pdetect/timefeat.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace testsupport {

using pdetect::data::Label;

// --- generators -----------------------------------------------------------

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(rng_); }
    std::size_t index(std::size_t lo, std::size_t hi) {  // inclusive
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
    }
    bool coin(double p = 0.5) { return uniform() < p; }

    std::vector<double> normals(std::size_t n, double sd = 1.0) {
        std::vector<double> v(n);
        for (auto& x : v) x = normal(sd);
        return v;
    }

    // Mixture of smooth noise, sparse spikes and coarse quantization so that equal
    // neighbouring magnitudes (plateaus) are common.
    std::vector<double> spiky_signal(std::size_t T) {
        std::vector<double> x(T);
        const bool quantized = coin(0.4);
        for (auto& v : x) {
            v = normal(0.3);
            if (coin(0.02)) v += (coin() ? 1 : -1) * uniform(1.0, 10.0);
            if (quantized) v = std::round(v * 2.0) / 2.0;
        }
        return x;
    }

    std::vector<Label> labels(std::size_t n, double rate) {
        std::vector<Label> y(n);
        for (auto& v : y) v = coin(rate) ? 1 : 0;
        return y;
    }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

// --- spectral -------------------------------------------------------------

// |sum_n x[n] exp(-2 pi i k n / T)| evaluated term by term in long double.
inline std::vector<double> direct_dft_magnitudes(const std::vector<double>& x) {
    const std::size_t T = x.size();
    std::vector<double> out(T / 2 + 1);
    const long double two_pi = 2.0L * std::numbers::pi_v<long double>;
    for (std::size_t k = 0; k < out.size(); ++k) {
        long double re = 0.0L, im = 0.0L;
        for (std::size_t n = 0; n < T; ++n) {
            const long double a = two_pi * static_cast<long double>((k * n) % T) / static_cast<long double>(T);
            re += x[n] * std::cos(a);
            im -= x[n] * std::sin(a);
        }
        out[k] = static_cast<double>(std::sqrt(re * re + im * im));
    }
    return out;
}

inline double rel_err(double got, double want, double floor = 1e-300) {
    return std::abs(got - want) / std::max({std::abs(want), std::abs(got), floor});
}

// --- peaks ----------------------------------------------------------------

struct BrutePeaks {
    std::vector<std::size_t> indices;
    std::vector<double> amplitudes;
};

inline BrutePeaks brute_force_peaks(const std::vector<double>& y, std::size_t nb, double threshold) {
    const long T = static_cast<long>(y.size());
    const long w = static_cast<long>(nb);
    std::vector<std::pair<double, std::size_t>> cand;  // (amplitude, index)
    for (long i = 0; i < T; ++i) {
        double neighbour_max = -1.0;
        for (long j = std::max(0L, i - w); j <= std::min(T - 1, i + w); ++j) {
            if (j != i) neighbour_max = std::max(neighbour_max, std::abs(y[j]));
        }
        if (std::abs(y[i]) > neighbour_max) cand.emplace_back(std::abs(y[i]), static_cast<std::size_t>(i));
    }
    // Descending amplitude; equal amplitudes keep index order.
    std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::size_t keep = 0;
    while (keep < cand.size()) {
        const double below = keep + 1 < cand.size() ? cand[keep + 1].first : 0.0;
        if (!(cand[keep].first - below >= threshold)) break;
        ++keep;
    }
    cand.resize(keep);
    std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
    BrutePeaks out;
    for (const auto& [amp, idx] : cand) {
        out.indices.push_back(idx);
        out.amplitudes.push_back(amp);
    }
    return out;
}

// --- metrics --------------------------------------------------------------

// Fraction of (positive, negative) pairs ranked correctly, ties counting one half.
inline double brute_force_auc(const std::vector<double>& s, const std::vector<Label>& y) {
    double wins = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!y[i]) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[j]) continue;
            pairs += 1.0;
            wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        }
    }
    return wins / pairs;
}

// s(i) = (b - a) / max(a, b) averaged over all points; singletons score 0.
inline double brute_force_silhouette(const std::vector<std::vector<double>>& x, const std::vector<std::size_t>& c) {
    const std::size_t n = x.size();
    const std::size_t k = *std::max_element(c.begin(), c.end()) + 1;
    auto dist = [&](std::size_t i, std::size_t j) {
        double s = 0.0;
        for (std::size_t d = 0; d < x[i].size(); ++d) s += (x[i][d] - x[j][d]) * (x[i][d] - x[j][d]);
        return std::sqrt(s);
    };
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> sum(k, 0.0);
        std::vector<std::size_t> cnt(k, 0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            sum[c[j]] += dist(i, j);
            ++cnt[c[j]];
        }
        if (cnt[c[i]] == 0) continue;
        const double a = sum[c[i]] / static_cast<double>(cnt[c[i]]);
        double b = INFINITY;
        for (std::size_t q = 0; q < k; ++q) {
            if (q != c[i] && cnt[q] > 0) b = std::min(b, sum[q] / static_cast<double>(cnt[q]));
        }
        const double m = std::max(a, b);
        total += m > 0.0 ? (b - a) / m : 0.0;
    }
    return total / static_cast<double>(n);
}

// Plug-in MI of two discrete variables, nats.
inline double discrete_mi(const std::vector<std::size_t>& a, const std::vector<Label>& y) {
    const double n = static_cast<double>(a.size());
    const std::size_t na = *std::max_element(a.begin(), a.end()) + 1;
    std::vector<double> joint(na * 2, 0.0), pa(na, 0.0), py(2, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[a[i] * 2 + y[i]] += 1.0 / n;
        pa[a[i]] += 1.0 / n;
        py[y[i]] += 1.0 / n;
    }
    double mi = 0.0;
    for (std::size_t u = 0; u < na; ++u) {
        for (int v = 0; v < 2; ++v) {
            const double p = joint[u * 2 + v];
            if (p > 0.0) mi += p * std::log(p / (pa[u] * py[v]));
        }
    }
    return mi;
}

// --- recurrent ------------------------------------------------------------

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// One LSTM direction over rows of seq (m x in), scalar loops, gates [i, f, g, o].
inline std::vector<std::vector<double>> reference_lstm(const std::vector<std::vector<double>>& seq,
                                                       const pdetect::nn::LstmDirectionParams& p, bool reverse) {
    const std::size_t m = seq.size();
    const std::size_t h = p.w_hidden.dim(1);
    const std::size_t in = p.w_input.dim(1);
    std::vector<double> hid(h, 0.0), cell(h, 0.0);
    std::vector<std::vector<double>> out(m, std::vector<double>(h));
    for (std::size_t s = 0; s < m; ++s) {
        const std::size_t t = reverse ? m - 1 - s : s;
        std::vector<double> z(4 * h);
        for (std::size_t r = 0; r < 4 * h; ++r) {
            double acc = p.bias[r];
            for (std::size_t c = 0; c < in; ++c) acc += p.w_input.at(r, c) * seq[t][c];
            for (std::size_t c = 0; c < h; ++c) acc += p.w_hidden.at(r, c) * hid[c];
            z[r] = acc;
        }
        for (std::size_t u = 0; u < h; ++u) {
            const double ig = sigmoid(z[u]);
            const double fg = sigmoid(z[h + u]);
            const double gg = std::tanh(z[2 * h + u]);
            const double og = sigmoid(z[3 * h + u]);
            cell[u] = fg * cell[u] + ig * gg;
            hid[u] = og * std::tanh(cell[u]);
        }
        out[t] = hid;
    }
    return out;
}

inline std::vector<std::vector<double>> reference_bilstm(std::vector<std::vector<double>> seq,
                                                         const std::vector<pdetect::nn::BiLstmLayerParams>& layers) {
    for (const auto& layer : layers) {
        const auto f = reference_lstm(seq, layer.forward, false);
        const auto b = reference_lstm(seq, layer.backward, true);
        for (std::size_t t = 0; t < seq.size(); ++t) {
            seq[t] = f[t];
            seq[t].insert(seq[t].end(), b[t].begin(), b[t].end());
        }
    }
    return seq;
}

// --- models ---------------------------------------------------------------

// Small enough for finite differences, with every branch and both LSTM layers active.
inline pdetect::nn::Architecture tiny_architecture() {
    pdetect::nn::Architecture a;
    a.chunk_stats = 3;
    a.freq_bins = 4;
    a.peak_features = 9;
    a.hidden = 2;
    a.lstm_layers = 2;
    a.attention_dim = 3;
    a.conv1_channels = 2;
    a.conv1_kernel = 1;
    a.conv2_channels = 3;
    a.conv2_kernel = 1;
    a.pool_width = 2;
    a.cnn_out = 3;
    return a;
}

inline pdetect::nn::Sample random_sample(Gen& g, const pdetect::nn::Architecture& a, std::size_t m) {
    pdetect::nn::Sample s;
    s.sequence = pdetect::nn::Tensor({m, a.chunk_stats}, g.normals(m * a.chunk_stats));
    s.freq = g.normals(a.freq_bins);
    s.peaks = g.normals(a.peak_features);
    return s;
}

// Scales every parameter by factor so activations stay away from saturation.
inline void scale_parameters(pdetect::nn::CompositeClassifier& model, double factor) {
    for (auto& p : model.parameters()) {
        for (auto& v : p.tensor->data()) v *= factor;
    }
}

struct GradCheck {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
    std::string worst;
};

// Central differences of the weighted batch loss against the analytic gradient.
// Relative error uses max(|analytic|, |numeric|, floor) as the denominator.
inline GradCheck gradient_check(const pdetect::nn::CompositeClassifier& model,
                                const std::vector<pdetect::nn::Sample>& batch, const std::vector<Label>& labels,
                                pdetect::nn::ClassWeights w, double eps = 1e-4, double floor = 1e-6) {
    using namespace pdetect::nn;
    const auto analytic = backward(model, batch, labels, w);
    auto loss_of = [&](const CompositeClassifier& m) {
        std::vector<double> p;
        for (const auto& s : batch) p.push_back(forward(m, s));
        return weighted_bce(p, labels, w.positive, w.negative);
    };
    CompositeClassifier probe = model;
    auto params = probe.parameters();
    const auto grads = analytic.grad.parameters();
    GradCheck out;
    for (std::size_t t = 0; t < params.size(); ++t) {
        for (std::size_t i = 0; i < params[t].tensor->size(); ++i) {
            double& v = (*params[t].tensor)[i];
            const double saved = v;
            v = saved + eps;
            const double up = loss_of(probe);
            v = saved - eps;
            const double down = loss_of(probe);
            v = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double err = rel_err((*grads[t].tensor)[i], numeric, floor);
            ++out.checked;
            if (err > out.max_rel_err) {
                out.max_rel_err = err;
                out.worst = params[t].name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return out;
}

}  // namespace testsupport
