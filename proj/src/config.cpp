#include "pdetect/pipeline.hpp"

#include "json_conv.hpp"
#include "pdetect/error.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace pdetect::pipeline {

namespace {

using nlohmann::json;

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Drops a trailing comment that is not inside a string.
std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

json parse_scalar(const std::string& raw, std::size_t line_no) {
    const std::string v = trim(raw);
    auto fail = [&] { throw Error(ErrorKind::InvalidConfig, "line " + std::to_string(line_no) + ": bad value '" + v + "'"); };
    if (v.empty()) fail();
    if (v.front() == '"') {
        if (v.size() < 2 || v.back() != '"') fail();
        return v.substr(1, v.size() - 2);
    }
    if (v == "true") return true;
    if (v == "false") return false;
    std::string digits;
    for (char c : v) {
        if (c != '_') digits.push_back(c);
    }
    const bool integral = digits.find_first_of(".eE") == std::string::npos;
    try {
        std::size_t used = 0;
        if (integral && digits.front() != '-') {
            const auto n = std::stoull(digits, &used);
            if (used == digits.size()) return n;
        } else if (integral) {
            const auto n = std::stoll(digits, &used);
            if (used == digits.size()) return n;
        } else {
            const double d = std::stod(digits, &used);
            if (used == digits.size()) return d;
        }
    } catch (const std::exception&) {
    }
    fail();
    return nullptr;
}

json parse_value(const std::string& raw, std::size_t line_no) {
    const std::string v = trim(raw);
    if (v.empty() || v.front() != '[') return parse_scalar(v, line_no);
    if (v.back() != ']') throw Error(ErrorKind::InvalidConfig, "line " + std::to_string(line_no) + ": unclosed list");
    json arr = json::array();
    std::stringstream items(v.substr(1, v.size() - 2));
    std::string item;
    while (std::getline(items, item, ',')) {
        if (!trim(item).empty()) arr.push_back(parse_scalar(item, line_no));
    }
    return arr;
}

json parse_flat_toml(const std::string& text) {
    json root = json::object();
    json* section = &root;
    std::stringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3 || line[1] == '[') {
                throw Error(ErrorKind::InvalidConfig, "line " + std::to_string(line_no) + ": unsupported table header");
            }
            const std::string name = trim(line.substr(1, line.size() - 2));
            if (root.contains(name)) {
                throw Error(ErrorKind::InvalidConfig, "line " + std::to_string(line_no) + ": duplicate section " + name);
            }
            root[name] = json::object();
            section = &root[name];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorKind::InvalidConfig, "line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw Error(ErrorKind::InvalidConfig, "line " + std::to_string(line_no) + ": empty key");
        (*section)[key] = parse_value(line.substr(eq + 1), line_no);
    }
    return root;
}

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> known) {
    if (!j.is_object()) throw Error(ErrorKind::InvalidConfig, where + " must be a table");
    const std::set<std::string> allowed(known.begin(), known.end());
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) throw Error(ErrorKind::InvalidConfig, "unknown key '" + key + "' in " + where);
    }
}

template <typename A, typename B>
void read_pair(const json& j, const char* key, std::pair<A, B>& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != 2) throw Error(ErrorKind::InvalidConfig, std::string(key) + " needs two values");
    out = {v.at(0).get<A>(), v.at(1).get<B>()};
}

void apply_synth(const json& j, data::SynthConfig& s) {
    reject_unknown(j, "synth",
                   {"n_signals", "T", "sample_rate_hz", "fundamental_hz", "fundamental_amplitude", "pd_rate",
                    "pd_band_hz", "pd_amplitude", "pd_bursts", "noise_profiles", "seed"});
    jsonconv::read(j, "n_signals", s.n_signals);
    jsonconv::read(j, "T", s.T);
    jsonconv::read(j, "sample_rate_hz", s.sample_rate_hz);
    jsonconv::read(j, "fundamental_hz", s.fundamental_hz);
    jsonconv::read(j, "fundamental_amplitude", s.fundamental_amplitude);
    jsonconv::read(j, "pd_rate", s.pd_rate);
    read_pair(j, "pd_band_hz", s.pd_band_hz);
    read_pair(j, "pd_amplitude", s.pd_amplitude);
    read_pair(j, "pd_bursts", s.pd_bursts);
    jsonconv::read(j, "seed", s.seed);
    if (j.contains("noise_profiles")) {
        s.noise_profiles.clear();
        for (const auto& p : j.at("noise_profiles")) {
            reject_unknown(p, "synth.noise_profiles", {"amplitude", "kind", "freq_hz", "period_s", "pulses", "apply_rate"});
            data::NoiseProfile np;
            jsonconv::read(p, "amplitude", np.amplitude);
            if (p.contains("kind")) np.kind = data::noise_kind_from_string(p.at("kind").get<std::string>());
            jsonconv::read(p, "freq_hz", np.freq_hz);
            jsonconv::read(p, "period_s", np.period_s);
            jsonconv::read(p, "pulses", np.pulses);
            jsonconv::read(p, "apply_rate", np.apply_rate);
            s.noise_profiles.push_back(np);
        }
    }
}

PipelineConfig apply(const json& root) {
    PipelineConfig cfg;
    reject_unknown(root, "config",
                   {"seed", "threshold", "test_fraction", "synth", "features", "select", "cluster", "model", "train",
                    "finetune"});
    if (root.contains("seed")) cfg.set_seed(root.at("seed").get<std::uint64_t>());
    jsonconv::read(root, "threshold", cfg.threshold);
    jsonconv::read(root, "test_fraction", cfg.test_fraction);
    if (root.contains("synth")) apply_synth(root.at("synth"), cfg.synth);
    if (root.contains("features")) {
        const auto& j = root.at("features");
        reject_unknown(j, "features", {"cutoff_hz", "neighborhood", "threshold_factor", "chunks"});
        jsonconv::from_json(j, cfg.time);
    }
    if (root.contains("select")) {
        const auto& j = root.at("select");
        reject_unknown(j, "select", {"fraction", "n_bins"});
        jsonconv::read(j, "fraction", cfg.select_fraction);
        jsonconv::read(j, "n_bins", cfg.mi_bins);
    }
    if (root.contains("cluster")) {
        const auto& j = root.at("cluster");
        reject_unknown(j, "cluster", {"k", "seed", "max_iter", "tol"});
        jsonconv::read(j, "k", cfg.kmeans.k);
        jsonconv::read(j, "seed", cfg.kmeans.seed);
        jsonconv::read(j, "max_iter", cfg.kmeans.max_iter);
        jsonconv::read(j, "tol", cfg.kmeans.tol);
    }
    if (root.contains("model")) {
        const auto& j = root.at("model");
        reject_unknown(j, "model",
                       {"hidden", "lstm_layers", "attention_dim", "conv1_channels", "conv1_kernel", "conv2_channels",
                        "conv2_kernel", "pool_width", "cnn_out", "leaky_slope"});
        jsonconv::from_json(j, cfg.arch);
    }
    for (const char* name : {"train", "finetune"}) {
        if (!root.contains(name)) continue;
        const auto& j = root.at(name);
        reject_unknown(j, name, {"lr", "epochs", "batch_size", "seed", "w_p", "w_n", "grad_clip"});
        jsonconv::from_json(j, std::string(name) == "train" ? cfg.train : cfg.finetune);
    }
    cfg.train.validate();
    cfg.finetune.validate();
    return cfg;
}

}  // namespace

PipelineConfig parse_config(const std::string& text, bool toml) {
    try {
        return apply(toml ? parse_flat_toml(text) : json::parse(text));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidConfig, e.what());
    }
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::MissingFile, path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.extension() == ".toml");
}

}  // namespace pdetect::pipeline
