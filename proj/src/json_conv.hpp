#pragma once

// nlohmann::json conversions shared by the checkpoint and config code. Reading is
// lenient: absent keys keep the value already in the destination.

#include "pdetect/nn/model.hpp"
#include "pdetect/nn/train.hpp"
#include "pdetect/timefeat.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>

namespace pdetect::jsonconv {

using nlohmann::json;

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

template <typename T>
void read(const json& j, const char* key, std::optional<T>& out) {
    if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

inline json to_json(const nn::Architecture& a) {
    return {{"chunk_stats", a.chunk_stats},       {"freq_bins", a.freq_bins},
            {"peak_features", a.peak_features},   {"hidden", a.hidden},
            {"lstm_layers", a.lstm_layers},       {"attention_dim", a.attention_dim},
            {"conv1_channels", a.conv1_channels}, {"conv1_kernel", a.conv1_kernel},
            {"conv2_channels", a.conv2_channels}, {"conv2_kernel", a.conv2_kernel},
            {"pool_width", a.pool_width},         {"cnn_out", a.cnn_out},
            {"leaky_slope", a.leaky_slope}};
}

inline void from_json(const json& j, nn::Architecture& a) {
    read(j, "chunk_stats", a.chunk_stats);
    read(j, "freq_bins", a.freq_bins);
    read(j, "peak_features", a.peak_features);
    read(j, "hidden", a.hidden);
    read(j, "lstm_layers", a.lstm_layers);
    read(j, "attention_dim", a.attention_dim);
    read(j, "conv1_channels", a.conv1_channels);
    read(j, "conv1_kernel", a.conv1_kernel);
    read(j, "conv2_channels", a.conv2_channels);
    read(j, "conv2_kernel", a.conv2_kernel);
    read(j, "pool_width", a.pool_width);
    read(j, "cnn_out", a.cnn_out);
    read(j, "leaky_slope", a.leaky_slope);
}

inline json to_json(const nn::TrainConfig& c) {
    json j{{"lr", c.lr}, {"epochs", c.epochs}, {"batch_size", c.batch_size}, {"seed", c.seed}};
    j["w_p"] = c.w_p ? json(*c.w_p) : json(nullptr);
    j["w_n"] = c.w_n ? json(*c.w_n) : json(nullptr);
    j["grad_clip"] = c.grad_clip ? json(*c.grad_clip) : json(nullptr);
    return j;
}

inline void from_json(const json& j, nn::TrainConfig& c) {
    read(j, "lr", c.lr);
    read(j, "epochs", c.epochs);
    read(j, "batch_size", c.batch_size);
    read(j, "seed", c.seed);
    read(j, "w_p", c.w_p);
    read(j, "w_n", c.w_n);
    read(j, "grad_clip", c.grad_clip);
}

inline json to_json(const timefeat::TimeFeatureConfig& c) {
    return {{"cutoff_hz", c.cutoff_hz},
            {"neighborhood", c.neighborhood},
            {"threshold_factor", c.threshold_factor},
            {"chunks", c.chunks}};
}

inline void from_json(const json& j, timefeat::TimeFeatureConfig& c) {
    read(j, "cutoff_hz", c.cutoff_hz);
    read(j, "neighborhood", c.neighborhood);
    read(j, "threshold_factor", c.threshold_factor);
    read(j, "chunks", c.chunks);
}

}  // namespace pdetect::jsonconv
