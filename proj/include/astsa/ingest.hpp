#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "astsa/core.hpp"

namespace astsa::ingest {

/// One ingestion unit, typically a daily export of the machine-side
/// buffer database. Samples are stored column-wise: `timestamps[i]`
/// pairs with `columns[ch][i]`; the missing marker encodes empty fields.
struct DataPacket {
    std::string packet_id;
    std::string machine_id;
    Timestamp created_at;  // export time, defines merge precedence
    std::vector<ChannelMeta> channels;
    std::vector<Timestamp> timestamps;
    std::map<std::string, std::vector<double>> columns;

    std::size_t row_count() const { return timestamps.size(); }
    const ChannelMeta* find_channel(const std::string& id) const;
};

enum class QcRule {
    NonMonotonicTime,    // fatal
    DuplicateTimestamp,  // later duplicate dropped
    OutOfPhysicalRange,  // sample sanitized to missing
    NonFiniteValue,      // sample sanitized to missing
    UndeclaredChannel,   // fatal
};

const char* to_string(QcRule rule);

struct QcViolation {
    QcRule rule;
    std::string channel_id;  // "-" when not channel-specific
    Timestamp timestamp;
    std::string detail;
};

struct QcReport {
    std::string packet_id;
    std::vector<QcViolation> violations;
    bool accepted = true;

    std::size_t count(QcRule rule) const;
};

/// Overlapping packets disagreed on a present value. Resolution keeps
/// the value from the packet with the latest created_at.
struct MergeConflict {
    std::string channel_id;
    Timestamp timestamp;
    double existing = 0.0;
    double incoming = 0.0;
};

/// Parses a metadata sidecar (JSON) plus sample table (CSV) pair.
/// Throws FormatError on malformed documents and SchemaError when the
/// documents disagree or required fields are absent.
DataPacket parse_packet(std::string_view meta_doc, std::string_view data_doc);

/// Rule-based validation. Never throws; every violated rule instance is
/// reported exactly once. `accepted` is false iff a fatal rule
/// (NonMonotonicTime, UndeclaredChannel) fired.
QcReport quality_check(const DataPacket& packet);

/// Applies a QC report: drops later duplicate-timestamp rows and
/// replaces range/finiteness violations with the missing marker, so a
/// subsequent merge sees clean data.
DataPacket sanitize(const DataPacket& packet, const QcReport& report);

/// Assembles QC-accepted, sanitized packets into one contiguous stream
/// spanning min to max packet timestamps. Unreported grid positions are
/// missing. Equal overlapping values merge silently; differing overlaps
/// resolve to the packet with the latest created_at and emit a
/// MergeConflict. The result does not depend on input order.
/// Throws IntervalError when a row is off the nominal grid.
std::pair<Stream, std::vector<MergeConflict>> merge_packets(
    std::vector<DataPacket> packets, const std::string& machine_id,
    std::uint32_t nominal_dt_seconds);

}  // namespace astsa::ingest
