#include "astsa/testgen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "astsa/ingest.hpp"

namespace astsa::testgen {

using nlohmann::json;
namespace fs = std::filesystem;

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::uint64_t rng_u64(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    return mix64(mix64(mix64(seed) ^ stream) ^ index);
}

std::uint64_t stream_id(const std::string& name) {
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
    for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

double rng_unit(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    return static_cast<double>(rng_u64(seed, stream, index) >> 11) * 0x1.0p-53;
}

GeneratorKind generator_kind_from_string(const std::string& s) {
    if (s == "constant") return GeneratorKind::constant;
    if (s == "ramp") return GeneratorKind::ramp;
    if (s == "sinusoid") return GeneratorKind::sinusoid;
    if (s == "random_walk") return GeneratorKind::random_walk;
    if (s == "duty_cycle") return GeneratorKind::duty_cycle;
    throw SpecError("unknown generator kind '" + s + "'");
}

void ScenarioSpec::validate() const {
    if (machine_id.empty()) throw SpecError("scenario needs a machine_id");
    if (days < 1) throw SpecError("scenario needs at least one day");
    if (dt_seconds == 0 || 86400 % dt_seconds != 0) {
        throw SpecError("dt_seconds must divide a day");
    }
    if (start.epoch_seconds % 86400 != 0) {
        throw SpecError("scenario start must be midnight UTC");
    }
    if (channels.empty()) throw SpecError("scenario needs at least one channel");
    std::set<std::string> ids;
    for (const auto& c : channels) {
        if (!valid_channel_id(c.channel_id)) {
            throw SpecError("malformed channel_id '" + c.channel_id + "'");
        }
        if (!ids.insert(c.channel_id).second) {
            throw SpecError("duplicate channel_id '" + c.channel_id + "'");
        }
        if (!(c.phys_min < c.phys_max)) {
            throw SpecError("channel '" + c.channel_id + "' has an empty physical range");
        }
    }
    const std::int64_t extent = static_cast<std::int64_t>(days) * 86400;
    std::set<std::string> event_channels;
    for (const auto& e : events) {
        if (!ids.count(e.channel_id)) {
            throw SpecError("event injection on unknown channel '" + e.channel_id + "'");
        }
        if (e.steps.empty() || e.count < 1) {
            throw SpecError("event injection needs steps and a positive count");
        }
        for (const auto& st : e.steps) {
            if (st.hold_s < dt_seconds || st.hold_s % dt_seconds != 0) {
                throw SpecError("event step holds must be positive multiples of dt");
            }
        }
        event_channels.insert(e.channel_id);
        if ((e.length_s() + 1200) * e.count > extent) {
            throw SpecError("event episodes do not fit the scenario extent");
        }
    }
    for (const auto& s : spikes) {
        if (!ids.count(s.channel_id)) {
            throw SpecError("spike injection on unknown channel '" + s.channel_id + "'");
        }
        if (event_channels.count(s.channel_id)) {
            throw SpecError("channel '" + s.channel_id + "' cannot carry spikes and events");
        }
        if (s.per_day_min < 1 || s.per_day_max < s.per_day_min) {
            throw SpecError("spike per-day bounds out of order");
        }
        const std::int64_t need = (s.per_day_max + 1) * s.min_separation_s + 240;
        if (need > 86400) throw SpecError("spikes cannot keep their separation within a day");
    }
    if (quadrant) {
        if (!ids.count(quadrant->angle_channel) || !ids.count(quadrant->load_channel) ||
            quadrant->angle_channel == quadrant->load_channel) {
            throw SpecError("quadrant bias needs two distinct existing channels");
        }
        if (quadrant->quadrant < 0 || quadrant->quadrant > 3) {
            throw SpecError("quadrant index must be 0..3");
        }
        if (!(quadrant->target_share > 0.0 && quadrant->target_share < 1.0)) {
            throw SpecError("target share must lie in (0, 1)");
        }
    }
    for (const auto& g : gaps) {
        if (g.day < 0 || g.day >= days) throw SpecError("gap day outside the scenario");
        if (g.start_s < 0 || g.duration_s <= 0 || g.start_s + g.duration_s > 86400) {
            throw SpecError("gap must lie within one day");
        }
        for (const auto& c : g.channels) {
            if (!ids.count(c)) throw SpecError("gap on unknown channel '" + c + "'");
        }
    }
}

namespace {

double quantize(double v) { return std::llround(v * 1000.0) / 1000.0; }

struct DayPlan {
    // slot -> forced value (events), slot -> add (spikes), slot set -> gap
    std::vector<std::pair<std::size_t, double>> overrides;
    std::vector<std::size_t> spike_slots;
    double spike_magnitude = 0.0;
    std::vector<std::pair<std::size_t, std::size_t>> gap_ranges;  // [lo, hi)
};

struct CsvWriter {
    std::string buf;
    std::ofstream out;

    explicit CsvWriter(const fs::path& path) : out(path, std::ios::binary | std::ios::trunc) {
        if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
        buf.reserve(1 << 16);
    }

    void number(double v) {
        char tmp[32];
        const auto [ptr, ec] = std::to_chars(tmp, tmp + sizeof(tmp), v);
        (void)ec;
        buf.append(tmp, ptr);
    }

    void raw(const char* s) { buf += s; }
    void raw(const std::string& s) { buf += s; }
    void ch(char c) { buf += c; }

    void maybe_flush() {
        if (buf.size() < (1 << 16) - 512) return;
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        buf.clear();
    }

    void close() {
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        buf.clear();
        out.close();
        if (!out) throw IoError("packet write failed");
    }
};

}  // namespace

ScenarioSpec parse_scenario(const std::string& json_text, const std::string& origin) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw SpecError(origin + ": " + e.what());
    }
    ScenarioSpec spec;
    try {
        spec.seed = doc.at("seed").get<std::uint64_t>();
        spec.machine_id = doc.at("machine_id").get<std::string>();
        spec.start = parse_iso8601(doc.at("start").get<std::string>());
        spec.days = doc.at("days").get<int>();
        spec.dt_seconds = doc.value("dt_seconds", 1u);
        spec.self_check = doc.value("self_check", true);
        for (const auto& c : doc.at("channels")) {
            ChannelGen g;
            g.channel_id = c.at("channel_id").get<std::string>();
            g.unit = c.value("unit", "");
            g.phys_min = c.at("phys_min").get<double>();
            g.phys_max = c.at("phys_max").get<double>();
            g.kind = generator_kind_from_string(c.at("generator").get<std::string>());
            const json p = c.value("params", json::object());
            g.base = p.value("base", 0.0);
            g.amplitude = p.value("amplitude", 0.0);
            g.period_s = p.value("period_s", 3600.0);
            g.phase_deg = p.value("phase_deg", 0.0);
            g.noise = p.value("noise", 0.0);
            g.start_value = p.value("start_value", 0.0);
            g.end_value = p.value("end_value", 0.0);
            g.step = p.value("step", 0.0);
            g.low = p.value("low", 0.0);
            g.high = p.value("high", 0.0);
            g.duty = p.value("duty", 0.5);
            spec.channels.push_back(std::move(g));
        }
        for (const auto& inj : doc.value("injections", json::array())) {
            const std::string kind = inj.at("kind").get<std::string>();
            if (kind == "event_pattern") {
                EventInjection e;
                e.channel_id = inj.at("channel_id").get<std::string>();
                e.count = inj.at("count").get<int>();
                for (const auto& s : inj.at("steps")) {
                    e.steps.push_back({quantize(s.at("value").get<double>()),
                                       s.at("hold_s").get<std::int64_t>()});
                }
                spec.events.push_back(std::move(e));
            } else if (kind == "sporadic_spike") {
                SpikeInjection s;
                s.channel_id = inj.at("channel_id").get<std::string>();
                s.magnitude = quantize(inj.at("magnitude").get<double>());
                s.per_day_min = inj.value("per_day_min", 2);
                s.per_day_max = inj.value("per_day_max", 5);
                s.min_separation_s = inj.value("min_separation_s", std::int64_t{300});
                spec.spikes.push_back(std::move(s));
            } else if (kind == "quadrant_bias") {
                QuadrantBias q;
                q.angle_channel = inj.at("angle_channel").get<std::string>();
                q.load_channel = inj.at("load_channel").get<std::string>();
                q.quadrant = inj.value("quadrant", 1);
                q.target_share = inj.at("target_share").get<double>();
                q.load_base = inj.value("load_base", 500.0);
                q.load_noise = inj.value("load_noise", 5.0);
                q.daily_jitter = inj.value("daily_jitter", 200);
                spec.quadrant = q;
            } else if (kind == "gap") {
                GapInjection g;
                for (const auto& c : inj.value("channels", json::array())) {
                    g.channels.push_back(c.get<std::string>());
                }
                g.day = inj.at("day").get<int>();
                g.start_s = inj.at("start_s").get<std::int64_t>();
                g.duration_s = inj.at("duration_s").get<std::int64_t>();
                spec.gaps.push_back(std::move(g));
            } else {
                throw SpecError("unknown injection kind '" + kind + "'");
            }
        }
    } catch (const json::exception& e) {
        throw SpecError(origin + ": " + e.what());
    }
    spec.validate();
    return spec;
}

ScenarioSpec load_scenario(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), path.string());
}

namespace {

struct Generation {
    const ScenarioSpec& spec;
    std::size_t slots_per_day;
    std::int64_t dt;

    // Per-channel stream ids, fixed up front so draws stay addressable.
    std::vector<std::uint64_t> noise_streams;
    std::vector<double> walk_state;

    // channel -> day -> plan
    std::vector<std::vector<DayPlan>> plans;
    int angle_idx = -1, load_idx = -1;
    std::vector<std::size_t> quad_dwell;   // per-day in-quadrant sample count
    std::vector<std::size_t> quad_offset;  // per-day rotation

    Manifest manifest;
    double quad_sum_in = 0.0, quad_sum_total = 0.0;
    std::uint64_t quad_pairs = 0;

    explicit Generation(const ScenarioSpec& s)
        : spec(s), slots_per_day(86400 / s.dt_seconds), dt(s.dt_seconds) {
        for (const auto& c : spec.channels) {
            noise_streams.push_back(stream_id("noise:" + c.channel_id));
            walk_state.push_back(c.start_value == 0.0 ? c.base : c.start_value);
        }
        plans.assign(spec.channels.size(), std::vector<DayPlan>(spec.days));
        plan_events();
        plan_spikes();
        plan_quadrant();
        plan_gaps();
    }

    int channel_index(const std::string& id) const {
        for (std::size_t i = 0; i < spec.channels.size(); ++i) {
            if (spec.channels[i].channel_id == id) return static_cast<int>(i);
        }
        return -1;
    }

    void add_override(int ch, std::int64_t offset_s, double value) {
        if (offset_s < 0) return;
        const auto day = static_cast<std::size_t>(offset_s / 86400);
        if (day >= plans[ch].size()) return;
        const auto slot = static_cast<std::size_t>((offset_s % 86400) / dt);
        plans[ch][day].overrides.emplace_back(slot, value);
    }

    void plan_events() {
        const std::uint64_t stream = stream_id("events");
        std::uint64_t draw = 0;
        for (const auto& e : spec.events) {
            const int ch = channel_index(e.channel_id);
            const std::int64_t extent = static_cast<std::int64_t>(spec.days) * 86400;
            const std::int64_t spacing = extent / e.count;
            const std::int64_t jitter_max = std::max<std::int64_t>(1, spacing / 8);
            std::int64_t prev_end = 0;
            for (int i = 0; i < e.count; ++i) {
                const std::int64_t center = spacing * i + spacing / 2;
                const std::int64_t jitter = static_cast<std::int64_t>(
                    rng_u64(spec.seed, stream, draw++) % (2 * jitter_max + 1)) - jitter_max;
                std::int64_t start_s = center + jitter;
                start_s = std::clamp<std::int64_t>(start_s, 1200,
                                                   extent - e.length_s() - 1200);
                if (start_s < prev_end + 600) start_s = prev_end + 600;
                start_s -= start_s % dt;
                if (start_s + e.length_s() + 1200 > extent) {
                    throw SpecError("event episodes overflow the scenario extent");
                }
                prev_end = start_s + e.length_s();

                std::int64_t off = start_s;
                for (const auto& step : e.steps) {
                    for (std::int64_t s = 0; s < step.hold_s; s += dt) {
                        add_override(ch, off + s, step.value);
                    }
                    off += step.hold_s;
                }
                manifest.events.push_back({e.channel_id, spec.start + start_s,
                                           spec.start + start_s + e.t_event_offset_s()});
            }
        }
        std::sort(manifest.events.begin(), manifest.events.end(),
                  [](const auto& a, const auto& b) { return a.t_event < b.t_event; });
    }

    void plan_spikes() {
        for (const auto& s : spec.spikes) {
            const int ch = channel_index(s.channel_id);
            const std::uint64_t count_stream = stream_id("spike_count:" + s.channel_id);
            const std::uint64_t pos_stream = stream_id("spike_pos:" + s.channel_id);
            std::uint64_t draw = 0;
            for (int d = 0; d < spec.days; ++d) {
                const int span = s.per_day_max - s.per_day_min + 1;
                const int c = s.per_day_min +
                              static_cast<int>(rng_u64(spec.seed, count_stream, d) % span);
                std::vector<std::int64_t> chosen;
                int attempts = 0;
                while (static_cast<int>(chosen.size()) < c) {
                    if (++attempts > 100000) {
                        throw SpecError("spike placement failed to satisfy separation");
                    }
                    const std::int64_t margin = 120;
                    const std::int64_t pos =
                        margin + static_cast<std::int64_t>(
                                     rng_u64(spec.seed, pos_stream, draw++) %
                                     static_cast<std::uint64_t>(86400 - 2 * margin));
                    const std::int64_t aligned = pos - pos % dt;
                    const bool clear = std::all_of(
                        chosen.begin(), chosen.end(), [&](std::int64_t p) {
                            return std::llabs(p - aligned) >= s.min_separation_s;
                        });
                    if (clear) chosen.push_back(aligned);
                }
                std::sort(chosen.begin(), chosen.end());
                DayPlan& plan = plans[ch][d];
                plan.spike_magnitude = s.magnitude;
                for (std::int64_t p : chosen) {
                    plan.spike_slots.push_back(static_cast<std::size_t>(p / dt));
                }
            }
        }
    }

    void plan_quadrant() {
        if (!spec.quadrant) return;
        const QuadrantBias& q = *spec.quadrant;
        angle_idx = channel_index(q.angle_channel);
        load_idx = channel_index(q.load_channel);
        const std::uint64_t stream = stream_id("quad_dwell");
        const auto S = static_cast<std::int64_t>(slots_per_day);
        const std::int64_t per_day = std::llround(q.target_share * static_cast<double>(S));
        const std::int64_t jitter_max = std::min<std::int64_t>(q.daily_jitter, per_day / 2);
        const std::int64_t target_total =
            std::llround(q.target_share * static_cast<double>(S) * spec.days);

        std::vector<std::int64_t> dwell(spec.days);
        std::int64_t total = 0;
        for (int d = 0; d < spec.days; ++d) {
            const std::int64_t jitter =
                jitter_max == 0
                    ? 0
                    : static_cast<std::int64_t>(rng_u64(spec.seed, stream, d) %
                                                (2 * jitter_max + 1)) - jitter_max;
            dwell[d] = std::clamp<std::int64_t>(per_day + jitter, 1, S - 1);
            total += dwell[d];
        }
        // Spread the closing correction so the annual dwell count is exact.
        std::int64_t delta = target_total - total;
        for (int d = 0; delta != 0; d = (d + 1) % spec.days) {
            const std::int64_t step = delta > 0 ? 1 : -1;
            if (dwell[d] + step >= 1 && dwell[d] + step <= S - 1) {
                dwell[d] += step;
                delta -= step;
            }
        }
        quad_dwell.assign(spec.days, 0);
        quad_offset.assign(spec.days, 0);
        const std::uint64_t rot = stream_id("quad_rot");
        for (int d = 0; d < spec.days; ++d) {
            quad_dwell[d] = static_cast<std::size_t>(dwell[d]);
            quad_offset[d] = static_cast<std::size_t>(rng_u64(spec.seed, rot, d) %
                                                      static_cast<std::uint64_t>(S));
        }
        Manifest::QuadrantTruth truth;
        truth.quadrant = q.quadrant;
        truth.daily_band_min = q.load_base - q.load_noise;
        truth.daily_band_max = q.load_base + q.load_noise;
        manifest.quadrant = truth;  // share and pairs filled after generation
    }

    void plan_gaps() {
        for (const auto& g : spec.gaps) {
            const std::size_t lo = static_cast<std::size_t>(g.start_s / dt);
            const std::size_t hi = static_cast<std::size_t>((g.start_s + g.duration_s) / dt);
            std::vector<std::string> affected = g.channels;
            if (affected.empty()) {
                for (const auto& c : spec.channels) affected.push_back(c.channel_id);
            }
            for (const auto& id : affected) {
                plans[channel_index(id)][g.day].gap_ranges.emplace_back(lo, hi);
                manifest.gap_samples += hi - lo;
            }
            const Timestamp t0 = spec.start + static_cast<std::int64_t>(g.day) * 86400;
            manifest.gaps.push_back({affected, t0 + g.start_s, t0 + g.start_s + g.duration_s});
        }
    }

    double base_value(std::size_t ch, std::uint64_t g) {
        const ChannelGen& c = spec.channels[ch];
        const double u = 2.0 * rng_unit(spec.seed, noise_streams[ch], g) - 1.0;
        double v = 0.0;
        switch (c.kind) {
            case GeneratorKind::constant:
                v = c.base + c.noise * u;
                break;
            case GeneratorKind::ramp: {
                const auto total =
                    static_cast<double>(spec.days) * static_cast<double>(slots_per_day) - 1.0;
                v = c.start_value + (c.end_value - c.start_value) *
                                        (total == 0.0 ? 0.0 : static_cast<double>(g) / total) +
                    c.noise * u;
                break;
            }
            case GeneratorKind::sinusoid: {
                const double t = static_cast<double>(g) * static_cast<double>(dt);
                v = c.base + c.amplitude * std::sin(2.0 * std::numbers::pi * t / c.period_s +
                                                    c.phase_deg * std::numbers::pi / 180.0) +
                    c.noise * u;
                break;
            }
            case GeneratorKind::random_walk: {
                v = std::clamp(walk_state[ch] + c.step * u, c.phys_min, c.phys_max);
                walk_state[ch] = v;
                break;
            }
            case GeneratorKind::duty_cycle: {
                const double t = std::fmod(static_cast<double>(g) * static_cast<double>(dt),
                                           c.period_s);
                v = (t < c.duty * c.period_s ? c.high : c.low) + c.noise * u;
                break;
            }
        }
        return quantize(v);
    }

    /// Fills one day of one channel, injections applied.
    void fill_day(std::size_t ch, int day, std::vector<double>& values) {
        values.resize(slots_per_day);
        const std::uint64_t day_base = static_cast<std::uint64_t>(day) * slots_per_day;

        if (static_cast<int>(ch) == angle_idx || static_cast<int>(ch) == load_idx) {
            fill_quadrant_day(ch, day, values);
        } else {
            for (std::size_t i = 0; i < slots_per_day; ++i) {
                values[i] = base_value(ch, day_base + i);
            }
        }

        const DayPlan& plan = plans[ch][day];
        for (const auto& [slot, value] : plan.overrides) values[slot] = value;
        auto gapped = [&](std::size_t slot) {
            return std::any_of(plan.gap_ranges.begin(), plan.gap_ranges.end(),
                               [&](const auto& r) { return slot >= r.first && slot < r.second; });
        };
        for (std::size_t slot : plan.spike_slots) {
            if (gapped(slot)) continue;
            values[slot] = quantize(values[slot] + plan.spike_magnitude);
            manifest.spikes.push_back({spec.channels[ch].channel_id,
                                       spec.start + static_cast<std::int64_t>(day) * 86400 +
                                           static_cast<std::int64_t>(slot) * dt,
                                       values[slot]});
        }
        for (const auto& [lo, hi] : plan.gap_ranges) {
            for (std::size_t i = lo; i < hi; ++i) values[i] = missing_value();
        }
    }

    void fill_quadrant_day(std::size_t ch, int day, std::vector<double>& values) {
        const QuadrantBias& q = *spec.quadrant;
        const std::size_t S = slots_per_day;
        const std::size_t n_in = quad_dwell[day];
        const std::size_t offset = quad_offset[day];
        if (static_cast<int>(ch) == angle_idx) {
            // Integer milli-degrees keep quadrant membership exact across
            // the CSV round-trip.
            const std::size_t m = S - n_in;
            for (std::size_t i = 0; i < S; ++i) {
                const std::size_t j = (i + S - offset) % S;
                std::int64_t milli;
                if (j < n_in) {
                    milli = 90000ll * q.quadrant +
                            static_cast<std::int64_t>(90000ull * j / n_in);
                } else {
                    const std::size_t jo = j - n_in;
                    milli = (90000ll * (q.quadrant + 1) +
                             static_cast<std::int64_t>(270000ull * jo / m)) %
                            360000ll;
                }
                values[i] = static_cast<double>(milli) / 1000.0;
            }
        } else {
            const std::uint64_t day_base = static_cast<std::uint64_t>(day) * S;
            for (std::size_t i = 0; i < S; ++i) {
                const double u = 2.0 * rng_unit(spec.seed, noise_streams[ch], day_base + i) - 1.0;
                values[i] = quantize(q.load_base + q.load_noise * u);
            }
        }
    }

    /// Tallies the exact in-quadrant and total load sums over slots where
    /// both channels survived the gap injections.
    void tally_quadrant(const std::vector<double>& angle, const std::vector<double>& load) {
        const QuadrantBias& q = *spec.quadrant;
        for (std::size_t i = 0; i < angle.size(); ++i) {
            if (is_missing(angle[i]) || is_missing(load[i])) continue;
            quad_pairs += 1;
            quad_sum_total += load[i];
            if (angle[i] >= 90.0 * q.quadrant && angle[i] < 90.0 * (q.quadrant + 1)) {
                quad_sum_in += load[i];
            }
        }
    }
};

std::string day_date(Timestamp day_start) { return to_iso8601(day_start).substr(0, 10); }

void write_meta(const ScenarioSpec& spec, Timestamp day_start, const fs::path& path) {
    json meta;
    meta["packet_id"] = spec.machine_id + "-" + day_date(day_start);
    meta["machine_id"] = spec.machine_id;
    meta["created_at"] = to_iso8601(day_start + 86400);
    json channels = json::array();
    for (const auto& c : spec.channels) {
        json ch;
        ch["channel_id"] = c.channel_id;
        ch["name"] = c.channel_id;
        ch["unit"] = c.unit;
        ch["phys_min"] = c.phys_min;
        ch["phys_max"] = c.phys_max;
        ch["machine_id"] = spec.machine_id;
        ch["kind"] = "sensor";
        channels.push_back(std::move(ch));
    }
    meta["channels"] = std::move(channels);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << meta.dump(2) << '\n';
    if (!out) throw IoError("packet meta write failed");
}

void write_csv(const ScenarioSpec& spec, Timestamp day_start,
               const std::vector<std::vector<double>>& columns, const fs::path& path) {
    CsvWriter w(path);
    w.raw("timestamp");
    for (const auto& c : spec.channels) {
        w.ch(',');
        w.raw(c.channel_id);
    }
    w.ch('\n');
    const std::string date_prefix = to_iso8601(day_start).substr(0, 11);
    const std::size_t slots = columns.front().size();
    const std::int64_t dt = spec.dt_seconds;
    char hms[16];
    for (std::size_t i = 0; i < slots; ++i) {
        const std::int64_t sec = static_cast<std::int64_t>(i) * dt;
        std::snprintf(hms, sizeof(hms), "%02d:%02d:%02dZ", static_cast<int>(sec / 3600),
                      static_cast<int>((sec / 60) % 60), static_cast<int>(sec % 60));
        w.raw(date_prefix);
        w.raw(hms);
        for (const auto& col : columns) {
            w.ch(',');
            if (!is_missing(col[i])) w.number(col[i]);
        }
        w.ch('\n');
        w.maybe_flush();
    }
    w.close();
}

void self_check_day(const ScenarioSpec& spec, Timestamp day_start,
                    const std::vector<std::vector<double>>& columns, const fs::path& meta_path,
                    const fs::path& csv_path) {
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    };
    const ingest::DataPacket packet = ingest::parse_packet(slurp(meta_path), slurp(csv_path));
    const std::size_t slots = columns.front().size();
    if (packet.row_count() != slots) {
        throw SpecError("self-check: packet " + packet.packet_id + " row count mismatch");
    }
    if (packet.timestamps.front() != day_start ||
        packet.timestamps.back() != day_start + static_cast<std::int64_t>(slots - 1) *
                                                    spec.dt_seconds) {
        throw SpecError("self-check: packet " + packet.packet_id + " timestamp mismatch");
    }
    for (std::size_t c = 0; c < spec.channels.size(); ++c) {
        const auto& parsed = packet.columns.at(spec.channels[c].channel_id);
        for (std::size_t i = 0; i < slots; ++i) {
            const double a = columns[c][i];
            const double b = parsed[i];
            const bool same = (is_missing(a) && is_missing(b)) || a == b;
            if (!same) {
                throw SpecError("self-check: packet " + packet.packet_id + " channel " +
                                spec.channels[c].channel_id + " diverges at slot " +
                                std::to_string(i));
            }
        }
    }
}

void save_manifest(const Manifest& m, const ScenarioSpec& spec, const fs::path& path) {
    json doc;
    doc["machine_id"] = spec.machine_id;
    doc["start"] = to_iso8601(spec.start);
    doc["days"] = spec.days;
    doc["dt_seconds"] = spec.dt_seconds;
    doc["gap_samples"] = m.gap_samples;
    json events = json::array();
    for (const auto& e : m.events) {
        events.push_back({{"channel_id", e.channel_id},
                          {"episode_start", to_iso8601(e.episode_start)},
                          {"t_event", to_iso8601(e.t_event)}});
    }
    doc["events"] = std::move(events);
    json spikes = json::array();
    for (const auto& s : m.spikes) {
        spikes.push_back(
            {{"channel_id", s.channel_id}, {"t", to_iso8601(s.t)}, {"value", s.value}});
    }
    doc["spikes"] = std::move(spikes);
    if (m.quadrant) {
        doc["quadrant"] = {{"quadrant", m.quadrant->quadrant},
                           {"constructed_share", m.quadrant->constructed_share},
                           {"daily_band_min", m.quadrant->daily_band_min},
                           {"daily_band_max", m.quadrant->daily_band_max},
                           {"expected_pairs", m.quadrant->expected_pairs}};
    }
    json gaps = json::array();
    for (const auto& g : m.gaps) {
        gaps.push_back({{"channels", g.channels},
                        {"t_start", to_iso8601(g.t_start)},
                        {"t_end", to_iso8601(g.t_end)}});
    }
    doc["gaps"] = std::move(gaps);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << doc.dump(2) << '\n';
    if (!out) throw IoError("manifest write failed");
}

}  // namespace

Manifest generate(const ScenarioSpec& spec, const fs::path& out_dir) {
    spec.validate();
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());

    Generation gen(spec);
    std::vector<std::vector<double>> columns(spec.channels.size());

    for (int day = 0; day < spec.days; ++day) {
        const Timestamp day_start = spec.start + static_cast<std::int64_t>(day) * 86400;
        for (std::size_t c = 0; c < spec.channels.size(); ++c) {
            gen.fill_day(c, day, columns[c]);
        }
        if (spec.quadrant) {
            gen.tally_quadrant(columns[gen.angle_idx], columns[gen.load_idx]);
        }
        const std::string stem = spec.machine_id + "-" + day_date(day_start);
        const fs::path meta_path = out_dir / (stem + ".meta.json");
        const fs::path csv_path = out_dir / (stem + ".data.csv");
        write_meta(spec, day_start, meta_path);
        write_csv(spec, day_start, columns, csv_path);
        if (spec.self_check) {
            self_check_day(spec, day_start, columns, meta_path, csv_path);
        }
    }

    if (spec.quadrant) {
        gen.manifest.quadrant->constructed_share =
            gen.quad_sum_total == 0.0 ? 0.0 : gen.quad_sum_in / gen.quad_sum_total;
        gen.manifest.quadrant->expected_pairs = gen.quad_pairs;
    }
    std::sort(gen.manifest.spikes.begin(), gen.manifest.spikes.end(),
              [](const auto& a, const auto& b) {
                  return a.t != b.t ? a.t < b.t : a.channel_id < b.channel_id;
              });
    save_manifest(gen.manifest, spec, out_dir / "manifest.json");
    return gen.manifest;
}

Manifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("manifest: ") + e.what());
    }
    Manifest m;
    m.gap_samples = doc.value("gap_samples", std::uint64_t{0});
    for (const auto& e : doc.value("events", json::array())) {
        m.events.push_back({e.at("channel_id").get<std::string>(),
                            parse_iso8601(e.at("episode_start").get<std::string>()),
                            parse_iso8601(e.at("t_event").get<std::string>())});
    }
    for (const auto& s : doc.value("spikes", json::array())) {
        m.spikes.push_back({s.at("channel_id").get<std::string>(),
                            parse_iso8601(s.at("t").get<std::string>()),
                            s.at("value").get<double>()});
    }
    if (doc.contains("quadrant")) {
        const auto& q = doc["quadrant"];
        Manifest::QuadrantTruth truth;
        truth.quadrant = q.at("quadrant").get<int>();
        truth.constructed_share = q.at("constructed_share").get<double>();
        truth.daily_band_min = q.at("daily_band_min").get<double>();
        truth.daily_band_max = q.at("daily_band_max").get<double>();
        truth.expected_pairs = q.at("expected_pairs").get<std::uint64_t>();
        m.quadrant = truth;
    }
    for (const auto& g : doc.value("gaps", json::array())) {
        Manifest::GapTruth truth;
        for (const auto& c : g.at("channels")) truth.channels.push_back(c.get<std::string>());
        truth.t_start = parse_iso8601(g.at("t_start").get<std::string>());
        truth.t_end = parse_iso8601(g.at("t_end").get<std::string>());
        m.gaps.push_back(std::move(truth));
    }
    return m;
}

}  // namespace astsa::testgen
