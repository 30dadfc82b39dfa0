#include "pdetect/cluster.hpp"

#include "csv.hpp"
#include "pdetect/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

namespace pdetect::cluster {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

std::pair<std::size_t, double> nearest(const FeatureMatrix& centroids, std::span<const double> x) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        const double d = squared_distance(x, centroids[c]);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return {best, best_d};
}

// k-means++ seeding.
FeatureMatrix seed_centroids(const FeatureMatrix& points, std::size_t k, std::mt19937_64& rng) {
    const std::size_t n = points.size();
    FeatureMatrix centroids;
    std::vector<bool> chosen(n, false);
    std::uniform_int_distribution<std::size_t> first(0, n - 1);
    std::size_t idx = first(rng);
    centroids.push_back(points[idx]);
    chosen[idx] = true;

    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points[i], centroids[0]);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    while (centroids.size() < k) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t pick = n;
        if (total > 0.0) {
            double target = unit(rng) * total;
            for (std::size_t i = 0; i < n; ++i) {
                if (d2[i] <= 0.0) continue;
                pick = i;
                target -= d2[i];
                if (target < 0.0) break;
            }
        }
        if (pick == n) {
            // Every remaining point coincides with a centroid.
            pick = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), false) - chosen.begin());
        }
        chosen[pick] = true;
        centroids.push_back(points[pick]);
        for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(points[i], centroids.back()));
    }
    return centroids;
}

}  // namespace

std::vector<double> ClusterModel::standardize(std::span<const double> feature) const {
    if (feature.size() != input_dim) {
        throw Error(ErrorKind::DimensionMismatch, "feature has " + std::to_string(feature.size()) +
                                                      " dims, model expects " + std::to_string(input_dim));
    }
    std::vector<double> z(kept_dims.size());
    for (std::size_t j = 0; j < kept_dims.size(); ++j) z[j] = (feature[kept_dims[j]] - mean[j]) / stddev[j];
    return z;
}

std::vector<double> ClusterModel::centroid_in_input_space(std::size_t j) const {
    std::vector<double> x(input_dim, 0.0);
    for (std::size_t d = 0; d < kept_dims.size(); ++d) x[kept_dims[d]] = centroids.at(j)[d] * stddev[d] + mean[d];
    for (std::size_t d = 0; d < dropped_dims.size(); ++d) x[dropped_dims[d]] = dropped_values[d];
    return x;
}

ClusterModel kmeans_fit(const FeatureMatrix& features, const KMeansOptions& options) {
    const std::size_t n = features.size();
    if (options.k < 1 || n < options.k) {
        throw Error(ErrorKind::TooFewPoints,
                    std::to_string(n) + " points cannot form " + std::to_string(options.k) + " clusters");
    }
    const std::size_t d = features[0].size();
    for (const auto& row : features) {
        if (row.size() != d) throw Error(ErrorKind::DimensionMismatch, "ragged feature matrix");
    }

    ClusterModel model;
    model.k = options.k;
    model.input_dim = d;
    model.seed = options.seed;
    for (std::size_t j = 0; j < d; ++j) {
        double mu = 0.0;
        for (const auto& row : features) mu += row[j];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (const auto& row : features) var += (row[j] - mu) * (row[j] - mu);
        const double sd = std::sqrt(var / static_cast<double>(n));
        if (sd <= 1e-12 * std::max(1.0, std::abs(mu))) {
            model.dropped_dims.push_back(j);
            model.dropped_values.push_back(features[0][j]);
        } else {
            model.kept_dims.push_back(j);
            model.mean.push_back(mu);
            model.stddev.push_back(sd);
        }
    }

    FeatureMatrix z;
    z.reserve(n);
    for (const auto& row : features) z.push_back(model.standardize(row));

    std::mt19937_64 rng(options.seed);
    model.centroids = seed_centroids(z, options.k, rng);
    const std::size_t dz = model.kept_dims.size();

    std::vector<std::size_t> labels(n, 0);
    for (std::size_t it = 0; it < options.max_iter; ++it) {
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            auto [c, dist] = nearest(model.centroids, z[i]);
            labels[i] = c;
            inertia += dist;
        }
        model.inertia_history.push_back(inertia);

        FeatureMatrix sums(options.k, std::vector<double>(dz, 0.0));
        std::vector<std::size_t> counts(options.k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[labels[i]];
            for (std::size_t j = 0; j < dz; ++j) sums[labels[i]][j] += z[i][j];
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < options.k; ++c) {
            if (counts[c] == 0) continue;  // empty cluster keeps its centroid
            for (std::size_t j = 0; j < dz; ++j) sums[c][j] /= static_cast<double>(counts[c]);
            shift = std::max(shift, std::sqrt(squared_distance(sums[c], model.centroids[c])));
            model.centroids[c] = std::move(sums[c]);
        }
        if (shift < options.tol) break;
    }

    model.inertia = 0.0;
    for (const auto& row : z) model.inertia += nearest(model.centroids, row).second;
    return model;
}

std::size_t assign(const ClusterModel& model, std::span<const double> feature) {
    return nearest(model.centroids, model.standardize(feature)).first;
}

std::vector<std::size_t> assign_all(const ClusterModel& model, const FeatureMatrix& features) {
    std::vector<std::size_t> out;
    out.reserve(features.size());
    for (const auto& row : features) out.push_back(assign(model, row));
    return out;
}

double silhouette_mean(const FeatureMatrix& features, std::span<const std::size_t> assignments) {
    const std::size_t n = features.size();
    if (assignments.size() != n) throw Error(ErrorKind::LengthMismatch, "assignment count differs from points");
    if (n < 2) throw Error(ErrorKind::TooFewPoints, "silhouette needs at least two points");
    const std::size_t k = *std::max_element(assignments.begin(), assignments.end()) + 1;
    std::vector<std::size_t> sizes(k, 0);
    for (auto a : assignments) ++sizes[a];
    if (std::count_if(sizes.begin(), sizes.end(), [](std::size_t s) { return s > 0; }) < 2) {
        throw Error(ErrorKind::SingleCluster, "silhouette needs at least two non-empty clusters");
    }

    double total = 0.0;
    std::vector<double> dist_sum(k);
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(dist_sum.begin(), dist_sum.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) dist_sum[assignments[j]] += std::sqrt(squared_distance(features[i], features[j]));
        }
        const std::size_t own = assignments[i];
        if (sizes[own] == 1) continue;  // s(i) = 0
        const double a = dist_sum[own] / static_cast<double>(sizes[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            if (c != own && sizes[c] > 0) b = std::min(b, dist_sum[c] / static_cast<double>(sizes[c]));
        }
        const double denom = std::max(a, b);
        total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    return total / static_cast<double>(n);
}

std::vector<std::pair<std::size_t, double>> sweep_k(const FeatureMatrix& features,
                                                    std::span<const std::size_t> k_values, std::uint64_t seed,
                                                    std::size_t max_iter, double tol) {
    std::vector<std::pair<std::size_t, double>> out;
    for (auto k : k_values) {
        const auto model = kmeans_fit(features, {.k = k, .seed = seed, .max_iter = max_iter, .tol = tol});
        FeatureMatrix z;
        z.reserve(features.size());
        for (const auto& row : features) z.push_back(model.standardize(row));
        const auto labels = assign_all(model, features);
        out.emplace_back(k, silhouette_mean(z, labels));
    }
    return out;
}

ClusterReport cluster_report(const ClusterModel& model, const FeatureMatrix& features,
                             std::span<const data::Label> labels) {
    if (features.size() != labels.size()) throw Error(ErrorKind::LengthMismatch, "features/labels differ in length");
    const auto assignments = assign_all(model, features);
    ClusterReport report;
    report.clusters.resize(model.k);
    for (std::size_t c = 0; c < model.k; ++c) report.clusters[c].id = c;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        auto& s = report.clusters[assignments[i]];
        ++s.size;
        s.positive_count += labels[i] ? 1 : 0;
    }
    for (auto& s : report.clusters) {
        s.positive_rate = s.size ? static_cast<double>(s.positive_count) / static_cast<double>(s.size) : 0.0;
    }
    std::stable_sort(report.clusters.begin(), report.clusters.end(),
                     [](const ClusterStats& a, const ClusterStats& b) { return a.positive_rate < b.positive_rate; });

    const auto populated = std::count_if(report.clusters.begin(), report.clusters.end(),
                                         [](const ClusterStats& s) { return s.size > 0; });
    if (populated >= 2) {
        FeatureMatrix z;
        z.reserve(features.size());
        for (const auto& row : features) z.push_back(model.standardize(row));
        report.silhouette_mean = silhouette_mean(z, assignments);
    }
    return report;
}

// --- persistence ----------------------------------------------------------

void save_model(const ClusterModel& model, const std::filesystem::path& path) {
    nlohmann::json j;
    j["k"] = model.k;
    j["seed"] = model.seed;
    j["centroids"] = model.centroids;
    j["norm"] = {{"mean", model.mean}, {"std", model.stddev}};
    j["dropped_dims"] = model.dropped_dims;
    j["dropped_values"] = model.dropped_values;
    j["kept_dims"] = model.kept_dims;
    j["input_dim"] = model.input_dim;
    j["inertia"] = model.inertia;
    csv::write_text(path, j.dump(2) + "\n");
}

ClusterModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::MissingFile, path.string());
    try {
        nlohmann::json j;
        in >> j;
        ClusterModel m;
        m.k = j.at("k").get<std::size_t>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.centroids = j.at("centroids").get<FeatureMatrix>();
        m.mean = j.at("norm").at("mean").get<std::vector<double>>();
        m.stddev = j.at("norm").at("std").get<std::vector<double>>();
        m.dropped_dims = j.at("dropped_dims").get<std::vector<std::size_t>>();
        m.dropped_values = j.value("dropped_values", std::vector<double>(m.dropped_dims.size(), 0.0));
        m.input_dim = j.value("input_dim", m.mean.size() + m.dropped_dims.size());
        if (j.contains("kept_dims")) {
            m.kept_dims = j.at("kept_dims").get<std::vector<std::size_t>>();
        } else {
            for (std::size_t d = 0; d < m.input_dim; ++d) {
                if (std::find(m.dropped_dims.begin(), m.dropped_dims.end(), d) == m.dropped_dims.end()) {
                    m.kept_dims.push_back(d);
                }
            }
        }
        m.inertia = j.value("inertia", 0.0);
        if (m.centroids.size() != m.k || m.kept_dims.size() != m.mean.size() || m.mean.size() != m.stddev.size()) {
            throw Error(ErrorKind::HeaderMismatch, path.string() + ": inconsistent cluster model");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::HeaderMismatch, path.string() + ": " + e.what());
    }
}

void write_report_csv(const ClusterReport& report, const std::filesystem::path& path) {
    std::string out;
    if (report.silhouette_mean) out += "# silhouette_mean=" + csv::fmt_double(*report.silhouette_mean) + "\n";
    out += "cluster,size,positive_count,positive_rate\n";
    for (const auto& s : report.clusters) {
        out += std::to_string(s.id) + "," + std::to_string(s.size) + "," + std::to_string(s.positive_count) + "," +
               csv::fmt_double(s.positive_rate) + "\n";
    }
    csv::write_text(path, out);
}

void write_sweep_csv(const std::vector<std::pair<std::size_t, double>>& sweep, const std::filesystem::path& path) {
    std::string out = "k,silhouette_mean\n";
    for (const auto& [k, s] : sweep) out += std::to_string(k) + "," + csv::fmt_double(s) + "\n";
    csv::write_text(path, out);
}

}  // namespace pdetect::cluster
