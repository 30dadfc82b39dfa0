#pragma once

#include "pdetect/data.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace pdetect::cluster {

// n rows of d features.
using FeatureMatrix = std::vector<std::vector<double>>;

struct ClusterModel {
    std::size_t k = 1;
    std::size_t input_dim = 0;
    std::vector<std::size_t> kept_dims;     // input dims used, ascending
    std::vector<std::size_t> dropped_dims;  // zero-variance input dims
    std::vector<double> dropped_values;     // constant value of each dropped dim
    std::vector<double> mean;               // per kept dim
    std::vector<double> stddev;             // per kept dim, > 0
    FeatureMatrix centroids;                // k x kept_dims.size(), standardized space
    double inertia = 0.0;
    std::uint64_t seed = 0;
    std::vector<double> inertia_history;    // after each Lloyd iteration

    std::vector<double> standardize(std::span<const double> feature) const;
    // Centroid j mapped back to input coordinates (dropped dims at their constant).
    std::vector<double> centroid_in_input_space(std::size_t j) const;
};

struct KMeansOptions {
    std::size_t k = 5;
    std::uint64_t seed = 0;
    std::size_t max_iter = 300;
    double tol = 1e-8;
};

ClusterModel kmeans_fit(const FeatureMatrix& features, const KMeansOptions& options);

// Nearest centroid, ties to the lower id.
std::size_t assign(const ClusterModel& model, std::span<const double> feature);
std::vector<std::size_t> assign_all(const ClusterModel& model, const FeatureMatrix& features);

// Mean silhouette with exact Euclidean distances; singleton clusters score 0.
double silhouette_mean(const FeatureMatrix& features, std::span<const std::size_t> assignments);

// (k, silhouette in the standardized space of each fit).
std::vector<std::pair<std::size_t, double>> sweep_k(const FeatureMatrix& features,
                                                    std::span<const std::size_t> k_values, std::uint64_t seed,
                                                    std::size_t max_iter = 300, double tol = 1e-8);

struct ClusterStats {
    std::size_t id = 0;
    std::size_t size = 0;
    std::size_t positive_count = 0;
    double positive_rate = 0.0;
};

struct ClusterReport {
    std::vector<ClusterStats> clusters;      // ascending positive_rate, ties by id
    std::optional<double> silhouette_mean;   // absent when fewer than two clusters are populated
};

ClusterReport cluster_report(const ClusterModel& model, const FeatureMatrix& features,
                             std::span<const data::Label> labels);

void save_model(const ClusterModel& model, const std::filesystem::path& path);
ClusterModel load_model(const std::filesystem::path& path);
void write_report_csv(const ClusterReport& report, const std::filesystem::path& path);
void write_sweep_csv(const std::vector<std::pair<std::size_t, double>>& sweep, const std::filesystem::path& path);

}  // namespace pdetect::cluster
