#include "astsa/core.hpp"

#include <algorithm>
#include <cassert>
#include <chrono>
#include <cstdio>

namespace astsa {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
    return -floor_div(-a, b);
}

}  // namespace

Timestamp Timestamp::day_start() const {
    return {floor_div(epoch_seconds, 86400) * 86400};
}

std::string to_iso8601(Timestamp t) {
    using namespace std::chrono;
    const sys_seconds tp{seconds{t.epoch_seconds}};
    const auto dp = floor<days>(tp);
    const year_month_day ymd{dp};
    const hh_mm_ss hms{tp - dp};
    char buf[72];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02dZ",
                  static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()), static_cast<int>(hms.hours().count()),
                  static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
    return buf;
}

Timestamp parse_iso8601(const std::string& text) {
    // Strict YYYY-MM-DDTHH:MM:SSZ, 20 characters.
    auto fail = [&]() -> Timestamp {
        throw FormatError("invalid ISO-8601 timestamp: '" + text + "'");
    };
    if (text.size() != 20 || text[4] != '-' || text[7] != '-' || text[10] != 'T' ||
        text[13] != ':' || text[16] != ':' || text[19] != 'Z') {
        fail();
    }
    auto num = [&](std::size_t pos, std::size_t n) -> int {
        int v = 0;
        for (std::size_t i = pos; i < pos + n; ++i) {
            const char c = text[i];
            if (c < '0' || c > '9') fail();
            v = v * 10 + (c - '0');
        }
        return v;
    };
    const int y = num(0, 4), mo = num(5, 2), d = num(8, 2);
    const int h = num(11, 2), mi = num(14, 2), s = num(17, 2);
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                             day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || s > 59) fail();
    const sys_days dp{ymd};
    const std::int64_t secs =
        duration_cast<seconds>(dp.time_since_epoch()).count() + h * 3600 + mi * 60 + s;
    return {secs};
}

const char* to_string(ChannelKind k) {
    return k == ChannelKind::sensor ? "sensor" : "derived";
}

ChannelKind channel_kind_from_string(const std::string& s) {
    if (s == "sensor") return ChannelKind::sensor;
    if (s == "derived") return ChannelKind::derived;
    throw ConfigError("unknown channel kind: '" + s + "'");
}

bool valid_channel_id(const std::string& id) {
    if (id.empty()) return false;
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
        if (!ok) return false;
    }
    return true;
}

void ChannelMeta::validate() const {
    if (!valid_channel_id(channel_id)) {
        throw ConfigError("channel_id '" + channel_id + "' must match [a-z0-9_]+");
    }
    if (!(phys_min < phys_max)) {
        throw ConfigError("channel '" + channel_id + "': phys_min must be < phys_max");
    }
}

std::int64_t Series::index_of(Timestamp t) const {
    const std::int64_t off = t - t0;
    if (off < 0 || off % dt_seconds != 0) return -1;
    const std::int64_t i = off / dt_seconds;
    if (i >= static_cast<std::int64_t>(values.size())) return -1;
    return i;
}

double Series::value_at(Timestamp t) const {
    const std::int64_t i = index_of(t);
    return i < 0 ? missing_value() : values[static_cast<std::size_t>(i)];
}

Stream::Stream(std::string machine_id, Timestamp t0, std::uint32_t dt_seconds, std::size_t length)
    : machine_id_(std::move(machine_id)), t0_(t0), dt_seconds_(dt_seconds), length_(length) {
    if (dt_seconds_ == 0) throw IntervalError("dt_seconds must be positive");
}

const Series& Stream::channel(const std::string& id) const {
    auto it = channels_.find(id);
    if (it == channels_.end()) throw UnknownChannel("unknown channel '" + id + "'");
    return it->second;
}

Series& Stream::channel_mut(const std::string& id) {
    auto it = channels_.find(id);
    if (it == channels_.end()) throw UnknownChannel("unknown channel '" + id + "'");
    return it->second;
}

void Stream::add_channel(Series series) {
    if (series.t0 != t0_ || series.dt_seconds != dt_seconds_ || series.size() != length_) {
        throw MismatchedInterval("series '" + series.meta.channel_id +
                                 "' does not match the stream grid");
    }
    channels_[series.meta.channel_id] = std::move(series);
}

TimeRange Stream::extent() const {
    if (length_ == 0) throw IntervalError("empty stream has no extent");
    return TimeRange{t0_, end()};
}

bool operator==(const Stream& a, const Stream& b) {
    if (a.machine_id_ != b.machine_id_ || a.dt_seconds_ != b.dt_seconds_ ||
        a.length_ != b.length_ || a.channels_.size() != b.channels_.size()) {
        return false;
    }
    if (a.length_ != 0 && a.t0_ != b.t0_) return false;
    for (const auto& [id, sa] : a.channels_) {
        auto it = b.channels_.find(id);
        if (it == b.channels_.end()) return false;
        const Series& sb = it->second;
        for (std::size_t i = 0; i < sa.values.size(); ++i) {
            const double va = sa.values[i], vb = sb.values[i];
            if (is_missing(va) != is_missing(vb)) return false;
            if (!is_missing(va) && va != vb) return false;
        }
    }
    return true;
}

namespace {

// Slot window [i_begin, i_end) of a grid (t0, dt, length) covered by range.
std::pair<std::int64_t, std::int64_t> slot_window(Timestamp t0, std::uint32_t dt,
                                                  std::size_t length, const TimeRange& range) {
    const auto len = static_cast<std::int64_t>(length);
    std::int64_t lo = ceil_div(range.start - t0, dt);
    std::int64_t hi = ceil_div(range.end - t0, dt);
    lo = std::clamp<std::int64_t>(lo, 0, len);
    hi = std::clamp<std::int64_t>(hi, 0, len);
    if (hi < lo) hi = lo;
    return {lo, hi};
}

}  // namespace

Series slice(const Series& series, const TimeRange& range) {
    const auto [lo, hi] = slot_window(series.t0, series.dt_seconds, series.size(), range);
    Series out;
    out.meta = series.meta;
    out.dt_seconds = series.dt_seconds;
    out.t0 = series.timestamp_at(static_cast<std::size_t>(lo));
    out.values.assign(series.values.begin() + lo, series.values.begin() + hi);
    return out;
}

Stream slice(const Stream& stream, const TimeRange& range) {
    const auto [lo, hi] = slot_window(stream.t0(), stream.dt_seconds(), stream.length(), range);
    Stream out(stream.machine_id(),
               stream.t0() + lo * static_cast<std::int64_t>(stream.dt_seconds()),
               stream.dt_seconds(), static_cast<std::size_t>(hi - lo));
    for (const auto& [id, series] : stream.channels()) {
        Series s;
        s.meta = series.meta;
        s.dt_seconds = series.dt_seconds;
        s.t0 = out.t0();
        s.values.assign(series.values.begin() + lo, series.values.begin() + hi);
        out.add_channel(std::move(s));
    }
    return out;
}

std::pair<Series, Series> align(const Series& a, const Series& b) {
    if (a.dt_seconds != b.dt_seconds) {
        throw MismatchedInterval("cannot align series with different sample intervals");
    }
    const std::int64_t dt = a.dt_seconds;
    Series oa, ob;
    oa.meta = a.meta;
    ob.meta = b.meta;
    oa.dt_seconds = ob.dt_seconds = a.dt_seconds;

    // Grids must share the same phase for any slot to coincide.
    const std::int64_t ra = ((a.t0.epoch_seconds % dt) + dt) % dt;
    const std::int64_t rb = ((b.t0.epoch_seconds % dt) + dt) % dt;
    const Timestamp start{std::max(a.t0, b.t0)};
    const Timestamp end{std::min(a.end(), b.end())};
    if (ra != rb || !(start < end)) {
        oa.t0 = ob.t0 = start;
        return {oa, ob};
    }
    const std::size_t n = static_cast<std::size_t>((end - start) / dt);
    const std::size_t ia = static_cast<std::size_t>((start - a.t0) / dt);
    const std::size_t ib = static_cast<std::size_t>((start - b.t0) / dt);
    oa.t0 = ob.t0 = start;
    oa.values.assign(a.values.begin() + ia, a.values.begin() + ia + n);
    ob.values.assign(b.values.begin() + ib, b.values.begin() + ib + n);
    return {oa, ob};
}

CoverageStats coverage_stats(const Series& series) {
    CoverageStats st;
    std::size_t run = 0, longest = 0;
    for (double v : series.values) {
        if (is_missing(v)) {
            ++st.missing;
            ++run;
            longest = std::max(longest, run);
        } else {
            ++st.present;
            run = 0;
        }
    }
    st.longest_gap_seconds = static_cast<std::int64_t>(longest) * series.dt_seconds;
    return st;
}

}  // namespace astsa
