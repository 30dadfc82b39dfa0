#include "pdetect/nn/bundle.hpp"

#include "csv.hpp"
#include "json_conv.hpp"
#include "pdetect/error.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>

namespace pdetect::nn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kCheckpointFormat = "pdetect-checkpoint-1";

// "rnn.0.fwd.w_input" -> "rnn.0.fwd"
std::string layer_of(const std::string& name) { return name.substr(0, name.rfind('.')); }

void append_f32(std::string& out, double v) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
}

float read_f32(const std::string& blob, std::size_t offset) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(blob[offset + b])) << (8 * b);
    }
    return std::bit_cast<float>(bits);
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::MissingFile, path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::HeaderMismatch, path.string() + ": " + e.what());
    }
}

std::string read_blob(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::MissingFile, path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

void save_checkpoint(const CompositeClassifier& model, const fs::path& dir, const CheckpointMeta& meta) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::IoFailure, dir.string() + ": " + ec.message());

    json layers = json::array();
    std::string blob;
    std::string current;
    auto flush = [&] {
        if (current.empty()) return;
        const std::string file = current + ".f32";
        std::ofstream out(dir / file, std::ios::binary);
        out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
        if (!out) throw Error(ErrorKind::IoFailure, (dir / file).string());
        blob.clear();
    };
    for (const auto& p : model.parameters()) {
        const std::string layer = layer_of(p.name);
        if (layer != current) {
            flush();
            current = layer;
            layers.push_back({{"name", layer}, {"file", layer + ".f32"}, {"tensors", json::array()}});
        }
        layers.back()["tensors"].push_back(
            {{"name", p.name}, {"shape", p.tensor->shape()}, {"offset", blob.size() / 4}, {"count", p.tensor->size()}});
        for (double v : p.tensor->data()) append_f32(blob, v);
    }
    flush();

    json manifest{{"format", kCheckpointFormat},
                  {"architecture", jsonconv::to_json(model.arch)},
                  {"parameter_count", model.parameter_count()},
                  {"seed", meta.seed},
                  {"layers", layers}};
    manifest["train_config"] = meta.config ? jsonconv::to_json(*meta.config) : json(nullptr);
    manifest["loss_history"] = meta.loss_history;
    csv::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

CompositeClassifier load_checkpoint(const fs::path& dir, CheckpointMeta* meta) {
    const fs::path manifest_path = dir / "manifest.json";
    const json manifest = read_json(manifest_path);
    try {
        if (manifest.value("format", "") != kCheckpointFormat) {
            throw Error(ErrorKind::HeaderMismatch, manifest_path.string() + ": not a checkpoint manifest");
        }
        Architecture arch;
        jsonconv::from_json(manifest.at("architecture"), arch);
        auto model = CompositeClassifier::zeros(arch);
        std::map<std::string, Tensor*> by_name;
        for (auto& p : model.parameters()) by_name[p.name] = p.tensor;

        for (const auto& layer : manifest.at("layers")) {
            const auto blob = read_blob(dir / layer.at("file").get<std::string>());
            for (const auto& t : layer.at("tensors")) {
                const auto name = t.at("name").get<std::string>();
                auto it = by_name.find(name);
                if (it == by_name.end()) throw Error(ErrorKind::ShapeMismatch, "unknown tensor " + name);
                Tensor& dst = *it->second;
                if (t.at("shape").get<std::vector<std::size_t>>() != dst.shape()) {
                    throw Error(ErrorKind::ShapeMismatch, "tensor " + name + " has the wrong shape");
                }
                const auto offset = t.at("offset").get<std::size_t>();
                if ((offset + dst.size()) * 4 > blob.size()) {
                    throw Error(ErrorKind::HeaderMismatch, "blob for " + name + " is truncated");
                }
                for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = read_f32(blob, 4 * (offset + i));
                by_name.erase(it);
            }
        }
        if (!by_name.empty()) throw Error(ErrorKind::HeaderMismatch, "checkpoint lacks " + by_name.begin()->first);
        if (meta) {
            *meta = CheckpointMeta{};
            meta->seed = manifest.value("seed", std::uint64_t{0});
            if (manifest.contains("train_config") && !manifest.at("train_config").is_null()) {
                TrainConfig cfg;
                jsonconv::from_json(manifest.at("train_config"), cfg);
                meta->config = cfg;
            }
            jsonconv::read(manifest, "loss_history", meta->loss_history);
        }
        return model;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::HeaderMismatch, manifest_path.string() + ": " + e.what());
    }
}

// --- bundle ---------------------------------------------------------------

std::size_t ModelBundle::route(const SignalFeatures& f) const { return cluster::assign(cluster_model, f.freq.values); }

const CompositeClassifier& ModelBundle::model_for(std::size_t cluster) const {
    auto it = per_cluster.find(cluster);
    return it == per_cluster.end() ? base : it->second;
}

double predict(const ModelBundle& bundle, const SignalFeatures& f) {
    return forward(bundle.model_for(bundle.route(f)), bundle.scaler.transform(f));
}

std::vector<double> predict(const ModelBundle& bundle, std::span<const SignalFeatures> features) {
    std::vector<double> out;
    out.reserve(features.size());
    for (const auto& f : features) out.push_back(predict(bundle, f));
    return out;
}

std::vector<double> predict_pooled(const ModelBundle& bundle, std::span<const SignalFeatures> features) {
    std::vector<double> out;
    out.reserve(features.size());
    for (const auto& f : features) out.push_back(forward(bundle.base, bundle.scaler.transform(f)));
    return out;
}

void save_scaler(const FeatureScaler& scaler, const timefeat::TimeFeatureConfig& time_config, const fs::path& path) {
    json j{{"time", jsonconv::to_json(time_config)},
           {"clamp", scaler.clamp},
           {"chunk_mean", scaler.chunk_mean},
           {"chunk_std", scaler.chunk_std},
           {"freq_mean", scaler.freq_mean},
           {"freq_std", scaler.freq_std},
           {"peak_mean", scaler.peak_mean},
           {"peak_std", scaler.peak_std}};
    csv::write_text(path, j.dump(2) + "\n");
}

void load_scaler(const fs::path& path, FeatureScaler& scaler, timefeat::TimeFeatureConfig& time_config) {
    const json j = read_json(path);
    try {
        time_config = {};
        jsonconv::from_json(j.at("time"), time_config);
        scaler = {};
        scaler.clamp = j.at("clamp").get<double>();
        scaler.chunk_mean = j.at("chunk_mean").get<std::vector<double>>();
        scaler.chunk_std = j.at("chunk_std").get<std::vector<double>>();
        scaler.freq_mean = j.at("freq_mean").get<std::vector<double>>();
        scaler.freq_std = j.at("freq_std").get<std::vector<double>>();
        scaler.peak_mean = j.at("peak_mean").get<std::vector<double>>();
        scaler.peak_std = j.at("peak_std").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::HeaderMismatch, path.string() + ": " + e.what());
    }
}

void save_bundle(const ModelBundle& bundle, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::IoFailure, dir.string() + ": " + ec.message());
    save_checkpoint(bundle.base, dir / "base");
    for (const auto& [id, model] : bundle.per_cluster) {
        if (id >= bundle.cluster_model.k) {
            throw Error(ErrorKind::InvalidConfig, "per-cluster model for unknown cluster " + std::to_string(id));
        }
        save_checkpoint(model, dir / ("cluster_" + std::to_string(id)));
    }
    freqfeat::save_selection(bundle.selection, dir / "selection.json");
    cluster::save_model(bundle.cluster_model, dir / "cluster_model.json");
    save_scaler(bundle.scaler, bundle.time_config, dir / "features.json");
}

ModelBundle load_bundle(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error(ErrorKind::MissingFile, dir.string() + " is not a bundle directory");
    ModelBundle b;
    b.base = load_checkpoint(dir / "base");
    b.selection = freqfeat::load_selection(dir / "selection.json");
    b.cluster_model = cluster::load_model(dir / "cluster_model.json");
    load_scaler(dir / "features.json", b.scaler, b.time_config);
    for (std::size_t id = 0; id < b.cluster_model.k; ++id) {
        const auto sub = dir / ("cluster_" + std::to_string(id));
        if (fs::exists(sub / "manifest.json")) b.per_cluster.emplace(id, load_checkpoint(sub));
    }
    return b;
}

}  // namespace pdetect::nn
