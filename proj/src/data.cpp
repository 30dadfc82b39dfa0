#include "pdetect/data.hpp"

#include "pdetect/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace pdetect::data {

namespace {

constexpr std::array<char, 4> kMagic{'G', 'P', 'D', '1'};
constexpr std::size_t kHeaderBytes = 4 + 4 + 4 + 8 + 1;

template <typename T>
void put_le(std::string& out, T value) {
    std::array<unsigned char, sizeof(T)> bytes{};
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes.begin(), bytes.end());
    }
    out.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

template <typename T>
T get_le(const char* in) {
    std::array<unsigned char, sizeof(T)> bytes{};
    std::memcpy(bytes.data(), in, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes.begin(), bytes.end());
    }
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

std::string read_file(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) {
        throw Error(ErrorKind::MissingFile, path.string());
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::MissingFile, path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorKind::IoFailure, "write failed: " + path.string());
}

SignalRecord positional_record(std::size_t index, double rate) {
    SignalRecord r;
    r.id = static_cast<std::int64_t>(index);
    r.group_id = static_cast<std::int64_t>(index / 3);
    r.phase = static_cast<int>(index % 3);
    r.sample_rate_hz = rate;
    return r;
}

bool is_positional(const SignalSet& set) {
    for (std::size_t i = 0; i < set.records.size(); ++i) {
        const auto& r = set.records[i];
        if (r.id != static_cast<std::int64_t>(i) || r.group_id != static_cast<std::int64_t>(i / 3) ||
            r.phase != static_cast<int>(i % 3)) {
            return false;
        }
    }
    return true;
}

// --- binary ---------------------------------------------------------------

SignalSet load_binary(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    if (bytes.size() < kHeaderBytes || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
        throw Error(ErrorKind::HeaderMismatch, path.string() + ": missing GPD1 header");
    }
    const auto n = get_le<std::uint32_t>(bytes.data() + 4);
    const auto T = get_le<std::uint32_t>(bytes.data() + 8);
    const auto rate = get_le<double>(bytes.data() + 12);
    const auto labeled_flag = static_cast<unsigned char>(bytes[20]);
    if (labeled_flag > 1) throw Error(ErrorKind::HeaderMismatch, "labeled flag must be 0 or 1");
    const bool labeled = labeled_flag == 1;

    const std::size_t payload = static_cast<std::size_t>(n) * T * sizeof(float);
    const std::size_t expected = kHeaderBytes + payload + (labeled ? n : 0);
    if (bytes.size() != expected) {
        if (labeled && bytes.size() == kHeaderBytes + payload && n > 0) {
            throw Error(ErrorKind::LabelMissing, path.string() + ": labeled flag set but labels absent");
        }
        std::ostringstream msg;
        msg << path.string() << ": header declares n=" << n << " T=" << T << " (" << expected
            << " bytes) but file has " << bytes.size() << " bytes";
        throw Error(ErrorKind::HeaderMismatch, msg.str());
    }

    SignalSet set;
    set.T = T;
    set.sample_rate_hz = rate;
    set.labeled = labeled;
    set.records.reserve(n);
    const char* cursor = bytes.data() + kHeaderBytes;
    for (std::uint32_t i = 0; i < n; ++i) {
        SignalRecord r = positional_record(i, rate);
        r.samples.resize(T);
        for (std::uint32_t t = 0; t < T; ++t) {
            r.samples[t] = get_le<float>(cursor);
            cursor += sizeof(float);
        }
        set.records.push_back(std::move(r));
    }
    if (labeled) {
        for (std::uint32_t i = 0; i < n; ++i) {
            const auto v = static_cast<unsigned char>(*cursor++);
            if (v > 1) throw Error(ErrorKind::HeaderMismatch, "label byte must be 0 or 1");
            set.records[i].label = v;
        }
    }
    return set;
}

void save_binary(const SignalSet& set, const std::filesystem::path& path) {
    if (!is_positional(set)) {
        throw Error(ErrorKind::InvalidConfig,
                    "binary format stores positional metadata only; call reindexed() or use csv");
    }
    std::string out;
    out.reserve(kHeaderBytes + set.size() * (set.T * sizeof(float) + 1));
    out.append(kMagic.data(), kMagic.size());
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.T));
    put_le<double>(out, set.sample_rate_hz);
    out.push_back(set.labeled ? 1 : 0);
    for (const auto& r : set.records) {
        for (float v : r.samples) put_le<float>(out, v);
    }
    if (set.labeled) {
        for (const auto& r : set.records) out.push_back(static_cast<char>(*r.label));
    }
    write_file(path, out);
}

// --- csv ------------------------------------------------------------------

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorKind::HeaderMismatch, "cannot parse " + what + ": '" + s + "'");
    }
}

SignalSet load_csv(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    std::istringstream in(text);
    std::string line;

    auto next_line = [&](std::string& l) {
        while (std::getline(in, l)) {
            if (!l.empty() && l.back() == '\r') l.pop_back();
            if (!l.empty()) return true;
        }
        return false;
    };

    if (!next_line(line) || line.rfind("#", 0) != 0) {
        throw Error(ErrorKind::HeaderMismatch, path.string() + ": missing '# n=.. T=..' meta line");
    }
    long long n = -1, T = -1, labeled = -1;
    double rate = -1;
    {
        std::istringstream meta(line.substr(1));
        std::string tok;
        while (meta >> tok) {
            auto eq = tok.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = tok.substr(0, eq);
            const std::string val = tok.substr(eq + 1);
            if (key == "n") n = static_cast<long long>(parse_double(val, "n"));
            else if (key == "T") T = static_cast<long long>(parse_double(val, "T"));
            else if (key == "sample_rate_hz") rate = parse_double(val, "sample_rate_hz");
            else if (key == "labeled") labeled = static_cast<long long>(parse_double(val, "labeled"));
        }
    }
    if (n < 0 || T < 0 || rate < 0 || (labeled != 0 && labeled != 1)) {
        throw Error(ErrorKind::HeaderMismatch, path.string() + ": incomplete meta line");
    }
    if (!next_line(line) || line.rfind("id,group,phase,label", 0) != 0) {
        throw Error(ErrorKind::HeaderMismatch, path.string() + ": missing column header");
    }
    if (split_fields(line).size() != static_cast<std::size_t>(T) + 4) {
        throw Error(ErrorKind::HeaderMismatch, path.string() + ": column header does not match T");
    }

    SignalSet set;
    set.T = static_cast<std::size_t>(T);
    set.sample_rate_hz = rate;
    set.labeled = labeled == 1;
    while (next_line(line)) {
        auto fields = split_fields(line);
        if (fields.size() != set.T + 4) {
            throw Error(ErrorKind::HeaderMismatch,
                        path.string() + ": row has " + std::to_string(fields.size()) + " fields");
        }
        SignalRecord r;
        r.id = static_cast<std::int64_t>(parse_double(fields[0], "id"));
        r.group_id = static_cast<std::int64_t>(parse_double(fields[1], "group"));
        r.phase = static_cast<int>(parse_double(fields[2], "phase"));
        r.sample_rate_hz = rate;
        if (!fields[3].empty()) {
            const double lv = parse_double(fields[3], "label");
            if (lv != 0.0 && lv != 1.0) throw Error(ErrorKind::HeaderMismatch, "label must be 0 or 1");
            r.label = static_cast<Label>(lv);
        } else if (set.labeled) {
            throw Error(ErrorKind::LabelMissing, "record " + fields[0] + " has no label");
        }
        r.samples.resize(set.T);
        for (std::size_t t = 0; t < set.T; ++t) {
            r.samples[t] = static_cast<float>(parse_double(fields[t + 4], "sample"));
        }
        set.records.push_back(std::move(r));
    }
    if (set.records.size() != static_cast<std::size_t>(n)) {
        throw Error(ErrorKind::HeaderMismatch, path.string() + ": header declares n=" + std::to_string(n) +
                                                   " but " + std::to_string(set.records.size()) +
                                                   " rows present");
    }
    validate(set);
    return set;
}

void save_csv(const SignalSet& set, const std::filesystem::path& path) {
    std::string out;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", set.sample_rate_hz);
    out += "# n=" + std::to_string(set.size()) + " T=" + std::to_string(set.T) + " sample_rate_hz=" + buf +
           " labeled=" + (set.labeled ? "1" : "0") + "\n";
    out += "id,group,phase,label";
    for (std::size_t t = 0; t < set.T; ++t) out += ",s" + std::to_string(t);
    out += '\n';
    for (const auto& r : set.records) {
        out += std::to_string(r.id) + ',' + std::to_string(r.group_id) + ',' + std::to_string(r.phase) + ',';
        if (r.label) out += std::to_string(static_cast<int>(*r.label));
        for (float v : r.samples) {
            // 9 significant digits round-trip any f32.
            std::snprintf(buf, sizeof buf, ",%.9g", static_cast<double>(v));
            out += buf;
        }
        out += '\n';
    }
    write_file(path, out);
}

// --- generator helpers ----------------------------------------------------

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

void add_damped_oscillation(std::vector<double>& x, double rate, double onset_s, double freq_hz,
                            double amplitude, double tau_s) {
    const auto T = x.size();
    const double end_s = onset_s + 8.0 * tau_s;
    auto first = static_cast<std::size_t>(std::ceil(onset_s * rate));
    auto last = std::min<std::size_t>(T, static_cast<std::size_t>(std::ceil(end_s * rate)));
    for (std::size_t n = first; n < last; ++n) {
        const double dt = static_cast<double>(n) / rate - onset_s;
        x[n] += amplitude * std::exp(-dt / tau_s) * std::sin(2.0 * std::numbers::pi * freq_hz * dt);
    }
}

}  // namespace

Format format_for_path(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".csv" ? Format::Csv : Format::BinaryF32;
}

void validate(const SignalSet& set) {
    std::set<std::int64_t> ids;
    std::set<std::pair<std::int64_t, int>> group_phase;
    for (const auto& r : set.records) {
        if (r.samples.size() != set.T) {
            throw Error(ErrorKind::HeaderMismatch, "record " + std::to_string(r.id) + " has length " +
                                                       std::to_string(r.samples.size()) + ", expected " +
                                                       std::to_string(set.T));
        }
        if (r.sample_rate_hz != set.sample_rate_hz) {
            throw Error(ErrorKind::InvalidConfig, "record " + std::to_string(r.id) + " has a different sample rate");
        }
        if (r.phase < 0 || r.phase > 2) {
            throw Error(ErrorKind::InvalidConfig, "record " + std::to_string(r.id) + " has phase outside {0,1,2}");
        }
        if (!ids.insert(r.id).second) {
            throw Error(ErrorKind::InvalidConfig, "duplicate record id " + std::to_string(r.id));
        }
        if (!group_phase.insert({r.group_id, r.phase}).second) {
            throw Error(ErrorKind::InvalidConfig,
                        "group " + std::to_string(r.group_id) + " repeats phase " + std::to_string(r.phase));
        }
        if (set.labeled && !r.label) {
            throw Error(ErrorKind::LabelMissing, "record " + std::to_string(r.id) + " has no label");
        }
        if (r.label && *r.label > 1) {
            throw Error(ErrorKind::InvalidConfig, "record " + std::to_string(r.id) + " label not in {0,1}");
        }
    }
}

SignalSet load_signal_set(const std::filesystem::path& path, Format format) {
    return format == Format::Csv ? load_csv(path) : load_binary(path);
}

SignalSet load_signal_set(const std::filesystem::path& path) {
    return load_signal_set(path, format_for_path(path));
}

void save_signal_set(const SignalSet& set, const std::filesystem::path& path, Format format) {
    validate(set);
    if (format == Format::Csv) save_csv(set, path);
    else save_binary(set, path);
}

void save_signal_set(const SignalSet& set, const std::filesystem::path& path) {
    save_signal_set(set, path, format_for_path(path));
}

std::vector<Label> labels_of(const SignalSet& set) {
    if (!set.labeled) throw Error(ErrorKind::UnlabeledSet, "signal set carries no labels");
    std::vector<Label> labels;
    labels.reserve(set.size());
    for (const auto& r : set.records) {
        if (!r.label) throw Error(ErrorKind::LabelMissing, "record " + std::to_string(r.id) + " has no label");
        labels.push_back(*r.label);
    }
    return labels;
}

SignalSet reindexed(SignalSet set) {
    for (std::size_t i = 0; i < set.records.size(); ++i) {
        auto& r = set.records[i];
        r.id = static_cast<std::int64_t>(i);
        r.group_id = static_cast<std::int64_t>(i / 3);
        r.phase = static_cast<int>(i % 3);
    }
    return set;
}

std::pair<SignalSet, SignalSet> stratified_split(const SignalSet& set, double test_fraction,
                                                 std::uint64_t seed) {
    if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) {
        throw Error(ErrorKind::InvalidConfig, "test fraction must lie in [0,1]");
    }
    const auto labels = labels_of(set);
    std::mt19937_64 rng(seed);
    std::vector<bool> in_test(set.size(), false);
    for (Label cls : {Label{0}, Label{1}}) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == cls) idx.push_back(i);
        }
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto take = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(idx.size())));
        for (std::size_t j = 0; j < take; ++j) in_test[idx[j]] = true;
    }
    SignalSet train, test;
    for (SignalSet* part : {&train, &test}) {
        part->T = set.T;
        part->sample_rate_hz = set.sample_rate_hz;
        part->labeled = true;
    }
    for (std::size_t i = 0; i < set.size(); ++i) {
        (in_test[i] ? test : train).records.push_back(set.records[i]);
    }
    return {std::move(train), std::move(test)};
}

// --- synthetic ------------------------------------------------------------

const char* to_string(NoiseKind kind) noexcept {
    switch (kind) {
        case NoiseKind::White: return "white";
        case NoiseKind::Tonal: return "tonal";
        case NoiseKind::RepetitivePulse: return "repetitive-pulse";
        case NoiseKind::RandomPulse: return "random-pulse";
    }
    return "white";
}

NoiseKind noise_kind_from_string(const std::string& name) {
    if (name == "white") return NoiseKind::White;
    if (name == "tonal") return NoiseKind::Tonal;
    if (name == "repetitive-pulse" || name == "repetitive_pulse") return NoiseKind::RepetitivePulse;
    if (name == "random-pulse" || name == "random_pulse") return NoiseKind::RandomPulse;
    throw Error(ErrorKind::InvalidConfig, "unknown noise kind '" + name + "'");
}

std::vector<NoiseProfile> SynthConfig::default_noise_profiles() {
    return {
        NoiseProfile{.amplitude = 0.01, .kind = NoiseKind::White},
        NoiseProfile{.amplitude = 0.02, .kind = NoiseKind::Tonal},
    };
}

double SynthConfig::effective_fundamental_hz() const {
    if (fundamental_hz > 0.0) return fundamental_hz;
    return T > 0 ? sample_rate_hz / static_cast<double>(T) : 0.0;
}

void validate(const SynthConfig& cfg) {
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidConfig, msg); };
    if (cfg.T < 2) fail("T must be at least 2");
    if (!(cfg.sample_rate_hz > 0.0)) fail("sample_rate_hz must be positive");
    if (!(cfg.pd_rate >= 0.0 && cfg.pd_rate <= 1.0)) fail("pd_rate must lie in [0,1]");
    if (!(cfg.pd_band_hz.first > 0.0 && cfg.pd_band_hz.first < cfg.pd_band_hz.second &&
          cfg.pd_band_hz.second < cfg.sample_rate_hz / 2.0)) {
        fail("pd_band_hz must satisfy 0 < low < high < sample_rate/2");
    }
    if (!(cfg.pd_amplitude.first >= 0.0 && cfg.pd_amplitude.first <= cfg.pd_amplitude.second)) {
        fail("pd_amplitude must be an ordered non-negative range");
    }
    if (cfg.pd_bursts.first < 1 || cfg.pd_bursts.first > cfg.pd_bursts.second) {
        fail("pd_bursts must be an ordered range starting at >= 1");
    }
    if (cfg.fundamental_hz < 0.0 || cfg.fundamental_amplitude < 0.0) fail("fundamental must be non-negative");
    for (const auto& p : cfg.noise_profiles) {
        if (p.amplitude < 0.0) fail("noise amplitude must be non-negative");
        if (!(p.apply_rate >= 0.0 && p.apply_rate <= 1.0)) fail("noise apply_rate must lie in [0,1]");
        if (p.freq_hz < 0.0 || p.freq_hz >= cfg.sample_rate_hz / 2.0) fail("noise freq_hz must be below Nyquist");
        if (p.period_s < 0.0) fail("noise period_s must be non-negative");
        if (p.pulses < 0) fail("noise pulses must be non-negative");
    }
}

SignalSet generate_synthetic(const SynthConfig& cfg) { return generate_synthetic_with_truth(cfg).set; }

SynthResult generate_synthetic_with_truth(const SynthConfig& cfg) {
    validate(cfg);
    const std::size_t n = cfg.n_signals;
    const std::size_t T = cfg.T;
    const double rate = cfg.sample_rate_hz;
    const double two_pi = 2.0 * std::numbers::pi;
    const double duration = static_cast<double>(T) / rate;

    std::mt19937_64 rng(cfg.seed);
    const auto n_pos = static_cast<std::size_t>(std::llround(static_cast<double>(n) * cfg.pd_rate));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> positive(n, false);
    for (std::size_t j = 0; j < n_pos; ++j) positive[order[j]] = true;

    // Each 3-phase group shares one fundamental phase offset.
    std::vector<double> group_phase((n + 2) / 3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (auto& g : group_phase) g = two_pi * unit(rng);

    SynthResult result;
    result.set.T = T;
    result.set.sample_rate_hz = rate;
    result.set.labeled = true;
    result.set.records.reserve(n);
    result.truth.pd_burst_count.assign(n, 0);
    result.truth.profile_applied.assign(n, std::vector<bool>(cfg.noise_profiles.size(), false));

    const double f0 = cfg.effective_fundamental_hz();
    for (std::size_t i = 0; i < n; ++i) {
        std::mt19937_64 srng(splitmix64(cfg.seed ^ splitmix64(i + 1)));
        std::vector<double> x(T, 0.0);
        const double phi = group_phase[i / 3] + two_pi * static_cast<double>(i % 3) / 3.0;
        for (std::size_t t = 0; t < T; ++t) {
            x[t] = cfg.fundamental_amplitude * std::sin(two_pi * f0 * static_cast<double>(t) / rate + phi);
        }

        for (std::size_t p = 0; p < cfg.noise_profiles.size(); ++p) {
            const auto& prof = cfg.noise_profiles[p];
            if (unit(srng) >= prof.apply_rate) continue;
            result.truth.profile_applied[i][p] = true;
            switch (prof.kind) {
                case NoiseKind::White: {
                    std::normal_distribution<double> gauss(0.0, prof.amplitude);
                    for (auto& v : x) v += gauss(srng);
                    break;
                }
                case NoiseKind::Tonal: {
                    const double f = prof.freq_hz > 0.0 ? prof.freq_hz : rate * (0.02 + 0.43 * unit(srng));
                    const double ph = two_pi * unit(srng);
                    for (std::size_t t = 0; t < T; ++t) {
                        x[t] += prof.amplitude * std::sin(two_pi * f * static_cast<double>(t) / rate + ph);
                    }
                    break;
                }
                case NoiseKind::RepetitivePulse: {
                    const double f = prof.freq_hz > 0.0
                                         ? prof.freq_hz
                                         : cfg.pd_band_hz.first +
                                               (cfg.pd_band_hz.second - cfg.pd_band_hz.first) * unit(srng);
                    const double period = prof.period_s > 0.0 ? prof.period_s : duration / 10.0;
                    const double tau = 3.0 / f;
                    for (double onset = period * unit(srng); onset < duration; onset += period) {
                        add_damped_oscillation(x, rate, onset, f, prof.amplitude, tau);
                    }
                    break;
                }
                case NoiseKind::RandomPulse: {
                    const double f = prof.freq_hz > 0.0
                                         ? prof.freq_hz
                                         : cfg.pd_band_hz.first +
                                               (cfg.pd_band_hz.second - cfg.pd_band_hz.first) * unit(srng);
                    const double tau = 3.0 / f;
                    for (int k = 0; k < prof.pulses; ++k) {
                        const double onset = duration * unit(srng);
                        const double amp = unit(srng) < 0.5 ? -prof.amplitude : prof.amplitude;
                        add_damped_oscillation(x, rate, onset, f, amp, tau);
                    }
                    break;
                }
            }
        }

        if (positive[i]) {
            std::uniform_int_distribution<int> count_dist(cfg.pd_bursts.first, cfg.pd_bursts.second);
            const int bursts = count_dist(srng);
            result.truth.pd_burst_count[i] = bursts;
            for (int b = 0; b < bursts; ++b) {
                const double onset = duration * unit(srng);
                const double f = cfg.pd_band_hz.first + (cfg.pd_band_hz.second - cfg.pd_band_hz.first) * unit(srng);
                double amp = cfg.pd_amplitude.first + (cfg.pd_amplitude.second - cfg.pd_amplitude.first) * unit(srng);
                if (unit(srng) < 0.5) amp = -amp;
                const double tau = (1.5 + 2.5 * unit(srng)) / f;
                add_damped_oscillation(x, rate, onset, f, amp, tau);
            }
        }

        SignalRecord r = positional_record(i, rate);
        r.samples.resize(T);
        std::transform(x.begin(), x.end(), r.samples.begin(), [](double v) { return static_cast<float>(v); });
        r.label = positive[i] ? Label{1} : Label{0};
        result.set.records.push_back(std::move(r));
    }
    return result;
}

}  // namespace pdetect::data
