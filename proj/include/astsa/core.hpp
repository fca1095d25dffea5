#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "astsa/errors.hpp"

namespace astsa {

/// Seconds since 1970-01-01T00:00:00Z. All timestamps are UTC and the
/// sample grids used throughout operate at whole-second resolution.
struct Timestamp {
    std::int64_t epoch_seconds = 0;

    friend auto operator<=>(const Timestamp&, const Timestamp&) = default;

    Timestamp operator+(std::int64_t s) const { return {epoch_seconds + s}; }
    Timestamp operator-(std::int64_t s) const { return {epoch_seconds - s}; }
    std::int64_t operator-(Timestamp other) const { return epoch_seconds - other.epoch_seconds; }

    /// Start of the UTC day containing this instant.
    Timestamp day_start() const;
};

/// Formats as `YYYY-MM-DDTHH:MM:SSZ`.
std::string to_iso8601(Timestamp t);

/// Parses exactly the format produced by to_iso8601. Throws FormatError.
Timestamp parse_iso8601(const std::string& text);

enum class ChannelKind { sensor, derived };

const char* to_string(ChannelKind k);
ChannelKind channel_kind_from_string(const std::string& s);

/// Identity, engineering unit, physical plausibility range and indicator
/// hypothesis note for one signal. The hypothesis field records why this
/// quantity was deemed worth measuring.
struct ChannelMeta {
    std::string channel_id;  // [a-z0-9_]+, unique per machine
    std::string name;
    std::string unit;
    double phys_min = 0.0;
    double phys_max = 0.0;
    std::string machine_id;
    std::string location;
    std::string hypothesis;
    ChannelKind kind = ChannelKind::sensor;

    /// Throws ConfigError when channel_id is malformed or the physical
    /// range is empty.
    void validate() const;
};

bool valid_channel_id(const std::string& id);

/// Marker for an absent sample. Gaps live on the grid as quiet NaNs so
/// that coverage stays auditable and arrays stay compact.
inline double missing_value() { return std::numeric_limits<double>::quiet_NaN(); }
inline bool is_missing(double v) { return std::isnan(v); }

/// One channel on a fixed grid: sample i has timestamp t0 + i*dt_seconds.
/// Present values are finite; gaps are NaN.
struct Series {
    ChannelMeta meta;
    Timestamp t0;
    std::uint32_t dt_seconds = 1;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    bool empty() const { return values.empty(); }

    Timestamp timestamp_at(std::size_t i) const {
        return t0 + static_cast<std::int64_t>(i) * dt_seconds;
    }
    /// One past the last grid slot.
    Timestamp end() const { return timestamp_at(values.size()); }

    /// Index of the grid slot at t, or -1 when t is off-grid or outside.
    std::int64_t index_of(Timestamp t) const;

    /// Value at t, missing when outside the extent or off-grid.
    double value_at(Timestamp t) const;
};

/// Half-open interval [start, end).
struct TimeRange {
    Timestamp start;
    Timestamp end;

    TimeRange() = default;
    TimeRange(Timestamp s, Timestamp e) : start(s), end(e) {
        if (!(start < end)) throw IntervalError("TimeRange start must precede end");
    }

    std::int64_t length_seconds() const { return end - start; }
    bool contains(Timestamp t) const { return start <= t && t < end; }

    friend bool operator==(const TimeRange&, const TimeRange&) = default;
};

/// Gap-aware multi-channel stream on one shared grid. All member series
/// have identical t0, dt and length; channels that did not report at a
/// slot hold the missing marker there.
class Stream {
public:
    Stream() = default;
    Stream(std::string machine_id, Timestamp t0, std::uint32_t dt_seconds, std::size_t length);

    const std::string& machine_id() const { return machine_id_; }
    Timestamp t0() const { return t0_; }
    std::uint32_t dt_seconds() const { return dt_seconds_; }
    std::size_t length() const { return length_; }
    Timestamp end() const { return t0_ + static_cast<std::int64_t>(length_) * dt_seconds_; }

    bool has_channel(const std::string& id) const { return channels_.count(id) != 0; }
    const Series& channel(const std::string& id) const;
    const std::map<std::string, Series>& channels() const { return channels_; }
    std::size_t channel_count() const { return channels_.size(); }

    /// Throws MismatchedInterval when the series does not sit on the
    /// stream grid.
    void add_channel(Series series);

    /// Mutable access for builders (ingest merge). Grid invariants are
    /// re-checked cheaply on each access in debug builds only.
    Series& channel_mut(const std::string& id);

    /// Full extent as a TimeRange; throws IntervalError when empty.
    TimeRange extent() const;

    friend bool operator==(const Stream&, const Stream&);

private:
    std::string machine_id_;
    Timestamp t0_;
    std::uint32_t dt_seconds_ = 1;
    std::size_t length_ = 0;
    std::map<std::string, Series> channels_;
};

/// Restriction of the stream to the intersection of `range` with its
/// extent. Channels are preserved; an empty intersection yields zero
/// length. Never fabricates samples.
Stream slice(const Stream& stream, const TimeRange& range);

/// Restriction of one series, same clipping rules as the stream slice.
Series slice(const Series& series, const TimeRange& range);

/// Trims both series to their overlapping grid. Positions missing in an
/// input stay missing in the corresponding output only; no gap
/// cross-propagation happens here. Throws MismatchedInterval when the
/// sample intervals differ.
std::pair<Series, Series> align(const Series& a, const Series& b);

struct CoverageStats {
    std::size_t present = 0;
    std::size_t missing = 0;
    std::int64_t longest_gap_seconds = 0;
};

CoverageStats coverage_stats(const Series& series);

}  // namespace astsa
