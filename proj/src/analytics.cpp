#include "astsa/analytics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace astsa::analytics {

namespace {

void append_number(std::string& buf, double v) {
    char tmp[32];
    const auto [ptr, ec] = std::to_chars(tmp, tmp + sizeof(tmp), v);
    (void)ec;
    buf.append(tmp, ptr);
}

}  // namespace

std::vector<Event> detect_events(const symbol::SymbolSequence& seq,
                                 const query::Pattern& pattern,
                                 std::int64_t context_window_s) {
    if (context_window_s <= 0) throw IntervalError("context window must be positive");
    std::vector<Event> out;
    if (seq.tokens.empty()) return out;
    const std::int64_t dt = seq.dt_seconds;
    const Timestamp seq_start = seq.tokens.front().t_start;
    int next_id = 1;
    for (const query::Match& m : query::find_matches(pattern, seq)) {
        Event e;
        e.event_id = next_id++;
        e.pattern_text = pattern.text;
        e.t_event = m.t_end - dt;
        const Timestamp win_end = e.t_event + dt;
        Timestamp win_start = win_end - context_window_s;
        e.clipped = win_start < seq_start;
        if (e.clipped) win_start = seq_start;
        e.window = TimeRange(win_start, win_end);
        e.match = m;
        out.push_back(std::move(e));
    }
    return out;
}

std::size_t event_report(const std::vector<Event>& events, const store::ChunkStore& chunks,
                         const std::string& machine_id,
                         const std::vector<std::string>& channels, std::uint32_t dt_seconds,
                         std::ostream& sink) {
    std::string buf = "event_id,t_event,clipped\n";
    for (const Event& e : events) {
        buf += std::to_string(e.event_id);
        buf += ',';
        buf += to_iso8601(e.t_event);
        buf += e.clipped ? ",1\n" : ",0\n";
    }
    std::size_t rows = 0;
    for (const Event& e : events) {
        buf += "\nevent_id,channel,timestamp,value\n";
        const Stream win = chunks.read_range(machine_id, channels, e.window, dt_seconds);
        for (const auto& id : channels) {
            const Series& s = win.channel(id);
            for (std::size_t i = 0; i < s.size(); ++i) {
                buf += std::to_string(e.event_id);
                buf += ',';
                buf += id;
                buf += ',';
                buf += to_iso8601(s.timestamp_at(i));
                buf += ',';
                if (!is_missing(s.values[i])) append_number(buf, s.values[i]);
                buf += '\n';
                ++rows;
            }
        }
        sink.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        buf.clear();
    }
    sink.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!sink) throw IoError("event report sink write failed");
    return rows;
}

std::vector<std::pair<std::string, query::Match>> recognize_operations(
    const symbol::SymbolSequence& state_seq,
    const std::map<std::string, query::Pattern>& mode_patterns) {
    std::vector<std::pair<std::string, query::Match>> out;
    for (const auto& [name, pattern] : mode_patterns) {
        for (const query::Match& m : query::find_matches(pattern, state_seq)) {
            out.emplace_back(name, m);
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second.t_start != b.second.t_start) return a.second.t_start < b.second.t_start;
        return a.first < b.first;
    });
    return out;
}

const char* to_string(FaultRule r) {
    return r == FaultRule::OutOfRangeIsolated ? "OutOfRangeIsolated" : "LocalOutlier";
}

std::vector<Timestamp> FaultReport::fault_timestamps() const {
    std::vector<Timestamp> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.t);
    return out;
}

namespace {

double median_of(std::vector<double>& scratch) {
    const std::size_t n = scratch.size();
    const std::size_t mid = n / 2;
    std::nth_element(scratch.begin(), scratch.begin() + mid, scratch.end());
    double m = scratch[mid];
    if (n % 2 == 0) {
        const double lo = *std::max_element(scratch.begin(), scratch.begin() + mid);
        m = (lo + m) / 2.0;
    }
    return m;
}

}  // namespace

FaultReport find_sporadic_faults(const Series& series, std::size_t max_run, double k,
                                 std::size_t half_window) {
    if (max_run == 0 || k <= 0.0 || half_window == 0) {
        throw ConfigError("find_sporadic_faults needs positive max_run, k and half_window");
    }
    const std::size_t n = series.size();
    if (2 * half_window + 1 > n) {
        throw InsufficientData("series of " + std::to_string(n) +
                               " samples is shorter than the MAD window of " +
                               std::to_string(2 * half_window + 1));
    }
    constexpr double eps = 1e-12;

    enum class Flag : unsigned char { clean, out_of_range, outlier };
    std::vector<Flag> flags(n, Flag::clean);

    std::vector<double> window, dev;
    window.reserve(2 * half_window + 1);
    dev.reserve(2 * half_window + 1);

    for (std::size_t i = 0; i < n; ++i) {
        const double v = series.values[i];
        if (is_missing(v)) continue;
        if (v < series.meta.phys_min || v > series.meta.phys_max) {
            flags[i] = Flag::out_of_range;
            continue;
        }
        const std::size_t lo = i >= half_window ? i - half_window : 0;
        const std::size_t hi = std::min(n, i + half_window + 1);
        window.clear();
        for (std::size_t j = lo; j < hi; ++j) {
            if (!is_missing(series.values[j])) window.push_back(series.values[j]);
        }
        if (window.size() < 3) continue;
        const double med = median_of(window);
        dev.clear();
        for (double w : window) dev.push_back(std::fabs(w - med));
        const double mad = median_of(dev);
        if (std::fabs(v - med) > k * (mad + eps)) flags[i] = Flag::outlier;
    }

    FaultReport report;
    report.channel_id = series.meta.channel_id;
    std::size_t i = 0;
    while (i < n) {
        if (flags[i] == Flag::clean) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < n && flags[j] != Flag::clean) ++j;
        if (j - i <= max_run) {
            for (std::size_t p = i; p < j; ++p) {
                report.entries.push_back(
                    {series.timestamp_at(p), series.values[p],
                     flags[p] == Flag::out_of_range ? FaultRule::OutOfRangeIsolated
                                                    : FaultRule::LocalOutlier});
            }
        }
        i = j;
    }
    return report;
}

PolarHistogram::PolarHistogram(double bin_width_deg) : width_(bin_width_deg) {
    if (!(bin_width_deg > 0.0)) throw BinWidthError("bin width must be positive");
    const double n = 360.0 / bin_width_deg;
    const auto count = static_cast<std::size_t>(std::llround(n));
    if (count == 0 || std::fabs(n - static_cast<double>(count)) > 1e-9) {
        throw BinWidthError("bin width must divide 360 degrees");
    }
    bins_.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        bins_[i].angle_start_deg = static_cast<double>(i) * width_;
    }
}

void PolarHistogram::add(double angle_deg, double load) {
    double a = std::fmod(angle_deg, 360.0);
    if (a < 0.0) a += 360.0;
    auto idx = static_cast<std::size_t>(a / width_);
    if (idx >= bins_.size()) idx = bins_.size() - 1;
    bins_[idx].count += 1;
    bins_[idx].sum += load;
    total_ += 1;
}

void PolarHistogram::merge(const PolarHistogram& other) {
    if (other.bins_.size() != bins_.size()) {
        throw BinWidthError("histogram merge needs identical bin widths");
    }
    for (std::size_t i = 0; i < bins_.size(); ++i) {
        bins_[i].count += other.bins_[i].count;
        bins_[i].sum += other.bins_[i].sum;
    }
    total_ += other.total_;
}

double PolarHistogram::total_sum() const {
    double s = 0.0;
    for (const Bin& b : bins_) s += b.sum;
    return s;
}

double PolarHistogram::mean(std::size_t bin) const {
    const Bin& b = bins_.at(bin);
    return b.count == 0 ? missing_value() : b.sum / static_cast<double>(b.count);
}

std::uint64_t PolarHistogram::quadrant_count(int q) const {
    std::uint64_t c = 0;
    for (const Bin& b : bins_) {
        if (b.angle_start_deg >= 90.0 * q && b.angle_start_deg < 90.0 * (q + 1)) c += b.count;
    }
    return c;
}

double PolarHistogram::quadrant_sum(int q) const {
    double s = 0.0;
    for (const Bin& b : bins_) {
        if (b.angle_start_deg >= 90.0 * q && b.angle_start_deg < 90.0 * (q + 1)) s += b.sum;
    }
    return s;
}

PolarHistogram polar_histogram(const Series& angle, const Series& load, double bin_width_deg) {
    PolarHistogram hist(bin_width_deg);
    const auto [a, l] = align(angle, load);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (is_missing(a.values[i]) || is_missing(l.values[i])) continue;
        hist.add(a.values[i], l.values[i]);
    }
    return hist;
}

DailyVsAggregate daily_vs_aggregate(const Series& angle, const Series& load,
                                    double bin_width_deg, int quadrant) {
    if (quadrant < 0 || quadrant > 3) throw ConfigError("quadrant index must be 0..3");
    PolarHistogram annual(bin_width_deg);
    DailyVsAggregate out;

    const auto [a, l] = align(angle, load);
    if (a.empty()) return out;

    Timestamp day = a.t0.day_start();
    double day_sum = 0.0;
    std::uint64_t day_count = 0;
    auto flush_day = [&] {
        out.daily_means.push_back(
            day_count == 0 ? missing_value() : day_sum / static_cast<double>(day_count));
        day_sum = 0.0;
        day_count = 0;
    };

    for (std::size_t i = 0; i < a.size(); ++i) {
        const Timestamp t = a.timestamp_at(i);
        while (t - day >= 86400) {
            flush_day();
            day = day + 86400;
        }
        if (is_missing(a.values[i]) || is_missing(l.values[i])) continue;
        annual.add(a.values[i], l.values[i]);
        double deg = std::fmod(a.values[i], 360.0);
        if (deg < 0.0) deg += 360.0;
        if (deg >= 90.0 * quadrant && deg < 90.0 * (quadrant + 1)) {
            day_sum += l.values[i];
            day_count += 1;
        }
    }
    flush_day();

    const double total = annual.total_sum();
    out.annual_quadrant_share = total == 0.0 ? 0.0 : annual.quadrant_sum(quadrant) / total;
    return out;
}

void write_histogram_csv(const PolarHistogram& hist, std::ostream& sink) {
    std::string buf = "bin_start_deg,count,sum,mean\n";
    for (std::size_t i = 0; i < hist.bins().size(); ++i) {
        const auto& b = hist.bins()[i];
        append_number(buf, b.angle_start_deg);
        buf += ',';
        buf += std::to_string(b.count);
        buf += ',';
        append_number(buf, b.sum);
        buf += ',';
        if (b.count > 0) append_number(buf, hist.mean(i));
        buf += '\n';
    }
    buf += "total,";
    buf += std::to_string(hist.total_samples());
    buf += ',';
    append_number(buf, hist.total_sum());
    buf += ',';
    if (hist.total_samples() > 0) {
        append_number(buf, hist.total_sum() / static_cast<double>(hist.total_samples()));
    }
    buf += '\n';
    sink.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!sink) throw IoError("histogram sink write failed");
}

}  // namespace astsa::analytics
