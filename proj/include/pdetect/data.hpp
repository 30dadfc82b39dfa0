#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace pdetect::data {

using Label = std::uint8_t;

// One fixed-length voltage waveform. Samples are stored as f32 so that the
// binary format round-trips bit-exactly.
struct SignalRecord {
    std::int64_t id = 0;
    std::int64_t group_id = 0;
    int phase = 0;
    std::vector<float> samples;
    double sample_rate_hz = 0.0;
    std::optional<Label> label;

    bool operator==(const SignalRecord&) const = default;
};

struct SignalSet {
    std::vector<SignalRecord> records;
    std::size_t T = 0;
    double sample_rate_hz = 0.0;
    bool labeled = false;

    std::size_t size() const noexcept { return records.size(); }
    bool empty() const noexcept { return records.empty(); }

    bool operator==(const SignalSet&) const = default;
};

enum class Format { BinaryF32, Csv };

// Picks the format from the extension: ".csv" is CSV, anything else binary.
Format format_for_path(const std::filesystem::path& path);

// Throws InvalidConfig/HeaderMismatch/LabelMissing on broken invariants.
void validate(const SignalSet& set);

SignalSet load_signal_set(const std::filesystem::path& path, Format format);
SignalSet load_signal_set(const std::filesystem::path& path);
void save_signal_set(const SignalSet& set, const std::filesystem::path& path, Format format);
void save_signal_set(const SignalSet& set, const std::filesystem::path& path);

// Labels of a labeled set, in record order. Throws UnlabeledSet otherwise.
std::vector<Label> labels_of(const SignalSet& set);

// Gives record i id=i, group_id=i/3, phase=i%3 (the layout the binary format implies).
SignalSet reindexed(SignalSet set);

// Stratified split into (train, test); each class contributes round(fraction * count)
// test records. Record order inside both parts follows the input order.
std::pair<SignalSet, SignalSet> stratified_split(const SignalSet& set, double test_fraction,
                                                 std::uint64_t seed);

// ---------------------------------------------------------------------------
// Synthetic generator
// ---------------------------------------------------------------------------

enum class NoiseKind { White, Tonal, RepetitivePulse, RandomPulse };

const char* to_string(NoiseKind kind) noexcept;
NoiseKind noise_kind_from_string(const std::string& name);

struct NoiseProfile {
    double amplitude = 0.0;
    NoiseKind kind = NoiseKind::White;
    // Tonal: tone frequency; pulse kinds: oscillation frequency of each pulse.
    // Zero draws a frequency per signal.
    double freq_hz = 0.0;
    // Repetitive pulse train period in seconds. Zero means ten pulses per record.
    double period_s = 0.0;
    // Random pulse: pulses per record at uniformly drawn onsets with random polarity.
    int pulses = 10;
    // Probability that a given signal receives this profile.
    double apply_rate = 1.0;
};

struct SynthConfig {
    std::size_t n_signals = 100;
    std::size_t T = 8000;
    double sample_rate_hz = 4.0e6;
    // Zero means sample_rate_hz / T, i.e. exactly one cycle per record.
    double fundamental_hz = 0.0;
    double fundamental_amplitude = 1.0;
    double pd_rate = 0.06;
    std::pair<double, double> pd_band_hz{3.0e5, 4.0e5};
    std::pair<double, double> pd_amplitude{0.08, 0.3};
    std::pair<int, int> pd_bursts{3, 20};
    std::vector<NoiseProfile> noise_profiles = default_noise_profiles();
    std::uint64_t seed = 7;

    static std::vector<NoiseProfile> default_noise_profiles();
    double effective_fundamental_hz() const;
};

void validate(const SynthConfig& cfg);

// Per-record ground truth the generator knows about but the file formats do not carry.
struct SynthTruth {
    std::vector<int> pd_burst_count;
    // profile_applied[i][p]: record i received noise profile p.
    std::vector<std::vector<bool>> profile_applied;
};

struct SynthResult {
    SignalSet set;
    SynthTruth truth;
};

SignalSet generate_synthetic(const SynthConfig& cfg);
SynthResult generate_synthetic_with_truth(const SynthConfig& cfg);

}  // namespace pdetect::data
