#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "astsa/core.hpp"
#include "astsa/store.hpp"
#include "astsa/symquery.hpp"

namespace astsa::analytics {

/// One detected incident. t_event is the last instant belonging to the
/// match; the context window covers the context_window_s seconds ending
/// right after it (window.end == t_event + dt), clipped at the sequence
/// start when the history is too short.
struct Event {
    int event_id = 0;
    std::string pattern_text;
    Timestamp t_event;
    TimeRange window;
    query::Match match;
    bool clipped = false;
};

std::vector<Event> detect_events(const symbol::SymbolSequence& seq,
                                 const query::Pattern& pattern,
                                 std::int64_t context_window_s);

/// Per-event raw data report: an overview timeline section (one line per
/// event) followed by one long-format CSV section per event with the
/// 1 s-resolution window slice of every requested channel. Returns the
/// number of data rows written.
std::size_t event_report(const std::vector<Event>& events, const store::ChunkStore& chunks,
                         const std::string& machine_id,
                         const std::vector<std::string>& channels, std::uint32_t dt_seconds,
                         std::ostream& sink);

/// Runs every mode pattern over the state sequence; results merged and
/// sorted by match start. Overlaps between different modes are reported
/// as-is.
std::vector<std::pair<std::string, query::Match>> recognize_operations(
    const symbol::SymbolSequence& state_seq,
    const std::map<std::string, query::Pattern>& mode_patterns);

enum class FaultRule { OutOfRangeIsolated, LocalOutlier };

const char* to_string(FaultRule r);

struct FaultEntry {
    Timestamp t;
    double value = 0.0;
    FaultRule rule = FaultRule::LocalOutlier;
};

struct FaultReport {
    std::string channel_id;
    std::vector<FaultEntry> entries;  // sorted by timestamp

    std::vector<Timestamp> fault_timestamps() const;
};

/// Flags samples that are outside the physical range or deviate from the
/// local median by more than k times the local MAD (+1e-12), computed
/// over the present samples in the centered window of 2*half_window+1
/// grid positions (clamped at the edges). Flagged runs longer than
/// max_run samples are dropped: those are signal, not sensor glitches.
/// Throws InsufficientData when the series is shorter than the window.
FaultReport find_sporadic_faults(const Series& series, std::size_t max_run, double k,
                                 std::size_t half_window);

/// Streaming per-angular-bin aggregation of a load quantity. add/merge
/// form a commutative monoid, so day partials combine in any order.
class PolarHistogram {
public:
    struct Bin {
        double angle_start_deg = 0.0;
        std::uint64_t count = 0;
        double sum = 0.0;
    };

    /// Throws BinWidthError unless bin_width_deg divides 360.
    explicit PolarHistogram(double bin_width_deg);

    void add(double angle_deg, double load);
    void merge(const PolarHistogram& other);

    double bin_width_deg() const { return width_; }
    const std::vector<Bin>& bins() const { return bins_; }
    std::uint64_t total_samples() const { return total_; }
    double total_sum() const;
    double mean(std::size_t bin) const;  // NaN when the bin is empty

    /// Quadrant q covers angles [90q, 90(q+1)), q in 0..3.
    std::uint64_t quadrant_count(int q) const;
    double quadrant_sum(int q) const;

private:
    double width_;
    std::vector<Bin> bins_;
    std::uint64_t total_ = 0;
};

/// Aligns the pair and tallies every present (angle, load) sample.
PolarHistogram polar_histogram(const Series& angle, const Series& load, double bin_width_deg);

/// The daily-invisible / annually-visible contrast: per-UTC-day mean load
/// inside one quadrant (NaN for days without in-quadrant samples) next to
/// that quadrant's share of the total load sum.
struct DailyVsAggregate {
    std::vector<double> daily_means;
    double annual_quadrant_share = 0.0;
};

DailyVsAggregate daily_vs_aggregate(const Series& angle, const Series& load,
                                    double bin_width_deg, int quadrant);

/// Schema: bin_start_deg,count,sum,mean rows plus a totals footer.
void write_histogram_csv(const PolarHistogram& hist, std::ostream& sink);

}  // namespace astsa::analytics
