#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "astsa/core.hpp"

namespace astsa::testgen {

/// Counter-based generator: every draw is a pure function of
/// (seed, stream, index), so any sample of any day can be reproduced in
/// isolation and cross-language ports can replay streams exactly.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t rng_u64(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);
std::uint64_t stream_id(const std::string& name);
/// Uniform in [0, 1).
double rng_unit(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

enum class GeneratorKind { constant, ramp, sinusoid, random_walk, duty_cycle };

GeneratorKind generator_kind_from_string(const std::string& s);

struct ChannelGen {
    std::string channel_id;
    std::string unit;
    double phys_min = 0.0;
    double phys_max = 0.0;
    GeneratorKind kind = GeneratorKind::constant;
    double base = 0.0;        // constant, sinusoid
    double amplitude = 0.0;   // sinusoid
    double period_s = 3600.0; // sinusoid, duty_cycle
    double phase_deg = 0.0;   // sinusoid
    double noise = 0.0;       // uniform, +-noise, all kinds
    double start_value = 0.0; // ramp
    double end_value = 0.0;   // ramp
    double step = 0.0;        // random_walk
    double low = 0.0;         // duty_cycle
    double high = 0.0;        // duty_cycle
    double duty = 0.5;        // duty_cycle
};

/// Scripted anomalous-operation episode: the channel is forced through
/// the given plateaus, then returns to its generator.
struct EventInjection {
    std::string channel_id;
    struct Step {
        double value = 0.0;
        std::int64_t hold_s = 0;
    };
    std::vector<Step> steps;
    int count = 0;
    /// The instant a matcher should report: episode start + first hold.
    std::int64_t t_event_offset_s() const {
        return steps.empty() ? 0 : steps.front().hold_s;
    }
    std::int64_t length_s() const {
        std::int64_t s = 0;
        for (const auto& st : steps) s += st.hold_s;
        return s;
    }
};

/// Single-sample additive spikes, a few per day, kept inside the
/// physical range so they read as sensor glitches rather than QC rejects.
struct SpikeInjection {
    std::string channel_id;
    double magnitude = 0.0;
    int per_day_min = 2;
    int per_day_max = 5;
    std::int64_t min_separation_s = 300;
};

/// Dwell-time bias: the angle channel spends an exact, per-day-jittered
/// share of samples inside one quadrant while the load channel stays
/// angle-independent, so daily quadrant means look ordinary and only the
/// annual share exposes the asymmetry. Angles sit on a milli-degree
/// lattice, making in-quadrant membership exact after CSV round-trips.
struct QuadrantBias {
    std::string angle_channel;
    std::string load_channel;
    int quadrant = 1;
    double target_share = 0.32;
    double load_base = 500.0;
    double load_noise = 5.0;
    int daily_jitter = 200;  // +- samples around the per-day dwell count
};

struct GapInjection {
    std::vector<std::string> channels;  // empty = every channel
    int day = 0;
    std::int64_t start_s = 0;
    std::int64_t duration_s = 0;
};

struct ScenarioSpec {
    std::uint64_t seed = 0;
    std::string machine_id;
    Timestamp start;
    int days = 1;
    std::uint32_t dt_seconds = 1;
    std::vector<ChannelGen> channels;
    std::vector<EventInjection> events;
    std::vector<SpikeInjection> spikes;
    std::optional<QuadrantBias> quadrant;
    std::vector<GapInjection> gaps;
    bool self_check = true;

    void validate() const;  // throws SpecError
};

ScenarioSpec parse_scenario(const std::string& json_text, const std::string& origin);
ScenarioSpec load_scenario(const std::filesystem::path& path);

struct Manifest {
    struct EventTruth {
        std::string channel_id;
        Timestamp episode_start;
        Timestamp t_event;
    };
    struct SpikeTruth {
        std::string channel_id;
        Timestamp t;
        double value;
    };
    struct QuadrantTruth {
        int quadrant = 0;
        double constructed_share = 0.0;
        double daily_band_min = 0.0;
        double daily_band_max = 0.0;
        std::uint64_t expected_pairs = 0;
    };
    struct GapTruth {
        std::vector<std::string> channels;
        Timestamp t_start;
        Timestamp t_end;
    };

    std::vector<EventTruth> events;
    std::vector<SpikeTruth> spikes;
    std::optional<QuadrantTruth> quadrant;
    std::vector<GapTruth> gaps;
    std::uint64_t gap_samples = 0;  // grid slots blanked per affected channel
};

/// Emits one packet pair per day plus manifest.json into out_dir.
/// Identical spec -> byte-identical outputs. The self-check re-parses a
/// sample of what was written and verifies every injection against the
/// manifest before returning.
Manifest generate(const ScenarioSpec& spec, const std::filesystem::path& out_dir);

Manifest load_manifest(const std::filesystem::path& path);

}  // namespace astsa::testgen
