#include "astsa/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace astsa::ingest {

using nlohmann::json;

const ChannelMeta* DataPacket::find_channel(const std::string& id) const {
    for (const auto& ch : channels) {
        if (ch.channel_id == id) return &ch;
    }
    return nullptr;
}

const char* to_string(QcRule rule) {
    switch (rule) {
        case QcRule::NonMonotonicTime: return "NonMonotonicTime";
        case QcRule::DuplicateTimestamp: return "DuplicateTimestamp";
        case QcRule::OutOfPhysicalRange: return "OutOfPhysicalRange";
        case QcRule::NonFiniteValue: return "NonFiniteValue";
        case QcRule::UndeclaredChannel: return "UndeclaredChannel";
    }
    return "?";
}

std::size_t QcReport::count(QcRule rule) const {
    std::size_t n = 0;
    for (const auto& v : violations) {
        if (v.rule == rule) ++n;
    }
    return n;
}

namespace {

std::string require_string(const json& j, const char* key, const char* where) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) {
        throw SchemaError(std::string(where) + ": missing string field '" + key + "'");
    }
    return it->get<std::string>();
}

double require_number(const json& j, const char* key, const char* where) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_number()) {
        throw SchemaError(std::string(where) + ": missing numeric field '" + key + "'");
    }
    return it->get<double>();
}

}  // namespace

DataPacket parse_packet(std::string_view meta_doc, std::string_view data_doc) {
    json meta;
    try {
        meta = json::parse(meta_doc);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("metadata sidecar is not valid JSON: ") + e.what());
    }
    if (!meta.is_object()) throw FormatError("metadata sidecar must be a JSON object");

    DataPacket packet;
    packet.packet_id = require_string(meta, "packet_id", "sidecar");
    packet.machine_id = require_string(meta, "machine_id", "sidecar");
    packet.created_at = parse_iso8601(require_string(meta, "created_at", "sidecar"));

    auto chs = meta.find("channels");
    if (chs == meta.end() || !chs->is_array()) {
        throw SchemaError("sidecar: missing 'channels' array");
    }
    for (const auto& c : *chs) {
        ChannelMeta cm;
        cm.channel_id = require_string(c, "channel_id", "sidecar channel");
        cm.name = c.value("name", cm.channel_id);
        cm.unit = c.value("unit", "");
        cm.phys_min = require_number(c, "phys_min", "sidecar channel");
        cm.phys_max = require_number(c, "phys_max", "sidecar channel");
        cm.machine_id = packet.machine_id;
        cm.location = c.value("location", "");
        cm.hypothesis = c.value("hypothesis", "");
        cm.kind = channel_kind_from_string(c.value("kind", "sensor"));
        try {
            cm.validate();
        } catch (const ConfigError& e) {
            throw SchemaError(std::string("sidecar channel: ") + e.what());
        }
        if (packet.find_channel(cm.channel_id)) {
            throw SchemaError("sidecar declares channel '" + cm.channel_id + "' twice");
        }
        packet.channels.push_back(std::move(cm));
    }

    // CSV sample table: header `timestamp,<channel_id>,...`, empty field
    // encodes a missing sample, LF line endings (a trailing CR is
    // tolerated).
    const char* p = data_doc.data();
    const char* doc_end = p + data_doc.size();
    auto next_line = [&](const char*& cur) -> std::string_view {
        const char* begin = cur;
        while (cur < doc_end && *cur != '\n') ++cur;
        const char* stop = cur;
        if (cur < doc_end) ++cur;  // skip '\n'
        if (stop > begin && stop[-1] == '\r') --stop;
        return {begin, static_cast<std::size_t>(stop - begin)};
    };

    if (p == doc_end) throw FormatError("data table is empty (missing header)");
    const std::string_view header = next_line(p);

    std::vector<std::string> column_ids;
    {
        std::size_t start = 0;
        while (start <= header.size()) {
            std::size_t comma = header.find(',', start);
            if (comma == std::string_view::npos) comma = header.size();
            column_ids.emplace_back(header.substr(start, comma - start));
            start = comma + 1;
            if (comma == header.size()) break;
        }
    }
    if (column_ids.empty() || column_ids[0] != "timestamp") {
        throw FormatError("data table header must start with 'timestamp'");
    }
    column_ids.erase(column_ids.begin());
    std::set<std::string> seen_columns;
    for (const auto& id : column_ids) {
        if (!packet.find_channel(id)) {
            throw SchemaError("data column '" + id + "' is not declared in the sidecar");
        }
        if (!seen_columns.insert(id).second) {
            throw SchemaError("data table declares column '" + id + "' twice");
        }
    }
    for (const auto& id : column_ids) packet.columns[id] = {};
    // Declared channels without a data column: all-missing columns.
    for (const auto& cm : packet.channels) {
        packet.columns.try_emplace(cm.channel_id);
    }

    std::vector<std::vector<double>*> cols;
    cols.reserve(column_ids.size());
    for (const auto& id : column_ids) cols.push_back(&packet.columns[id]);

    std::size_t line_no = 1;
    while (p < doc_end) {
        const std::string_view line = next_line(p);
        ++line_no;
        if (line.empty() && p >= doc_end) break;  // trailing newline
        const char* cur = line.data();
        const char* end = cur + line.size();

        const char* field_end = static_cast<const char*>(memchr(cur, ',', end - cur));
        if (!field_end) field_end = end;
        packet.timestamps.push_back(
            parse_iso8601(std::string(cur, static_cast<std::size_t>(field_end - cur))));
        cur = field_end;

        for (std::size_t c = 0; c < cols.size(); ++c) {
            if (cur >= end || *cur != ',') {
                throw FormatError("row " + std::to_string(line_no) + ": expected " +
                                  std::to_string(cols.size()) + " value fields");
            }
            ++cur;
            field_end = static_cast<const char*>(memchr(cur, ',', end - cur));
            if (!field_end) field_end = end;
            if (field_end == cur) {
                cols[c]->push_back(missing_value());
            } else {
                double v = 0.0;
                const auto [ptr, ec] = std::from_chars(cur, field_end, v);
                if (ec != std::errc{} || ptr != field_end) {
                    throw FormatError("row " + std::to_string(line_no) + ": bad number '" +
                                      std::string(cur, field_end) + "'");
                }
                cols[c]->push_back(v);
            }
            cur = field_end;
        }
        if (cur != end) {
            throw FormatError("row " + std::to_string(line_no) + ": too many fields");
        }
        // Columns declared in the sidecar but absent from the table pad
        // with missing to keep all columns row-aligned.
        for (auto& [id, col] : packet.columns) {
            if (col.size() < packet.timestamps.size()) col.push_back(missing_value());
        }
    }
    return packet;
}

QcReport quality_check(const DataPacket& packet) {
    QcReport report;
    report.packet_id = packet.packet_id;

    std::unordered_map<std::string, const ChannelMeta*> metas;
    for (const auto& cm : packet.channels) metas[cm.channel_id] = &cm;

    for (const auto& [id, col] : packet.columns) {
        auto it = metas.find(id);
        if (it == metas.end()) {
            report.violations.push_back({QcRule::UndeclaredChannel, id, Timestamp{0},
                                         "column has no sidecar declaration"});
            report.accepted = false;
            continue;
        }
        const ChannelMeta& meta = *it->second;
        for (std::size_t i = 0; i < col.size() && i < packet.timestamps.size(); ++i) {
            const double v = col[i];
            if (is_missing(v)) continue;
            if (!std::isfinite(v)) {
                report.violations.push_back(
                    {QcRule::NonFiniteValue, id, packet.timestamps[i], "non-finite sample"});
            } else if (v < meta.phys_min || v > meta.phys_max) {
                report.violations.push_back({QcRule::OutOfPhysicalRange, id,
                                             packet.timestamps[i],
                                             "value " + std::to_string(v) + " outside [" +
                                                 std::to_string(meta.phys_min) + ", " +
                                                 std::to_string(meta.phys_max) + "]"});
            }
        }
    }

    std::unordered_set<std::int64_t> seen;
    seen.reserve(packet.timestamps.size() * 2);
    Timestamp prev{0};
    bool have_prev = false;
    for (const auto& t : packet.timestamps) {
        if (have_prev && t < prev) {
            report.violations.push_back(
                {QcRule::NonMonotonicTime, "-", t, "timestamp precedes " + to_iso8601(prev)});
            report.accepted = false;
        }
        if (!seen.insert(t.epoch_seconds).second) {
            report.violations.push_back(
                {QcRule::DuplicateTimestamp, "-", t, "later duplicate row dropped"});
        }
        if (!have_prev || t > prev) prev = t;
        have_prev = true;
    }
    return report;
}

DataPacket sanitize(const DataPacket& packet, const QcReport& report) {
    // Row indices to drop (later duplicates) and (channel, timestamp)
    // cells to blank.
    std::unordered_set<std::int64_t> dup_times;
    std::unordered_map<std::string, std::unordered_set<std::int64_t>> blank;
    for (const auto& v : report.violations) {
        if (v.rule == QcRule::DuplicateTimestamp) {
            dup_times.insert(v.timestamp.epoch_seconds);
        } else if (v.rule == QcRule::OutOfPhysicalRange || v.rule == QcRule::NonFiniteValue) {
            blank[v.channel_id].insert(v.timestamp.epoch_seconds);
        }
    }

    DataPacket out;
    out.packet_id = packet.packet_id;
    out.machine_id = packet.machine_id;
    out.created_at = packet.created_at;
    out.channels = packet.channels;
    for (const auto& [id, col] : packet.columns) out.columns[id] = {};

    std::unordered_set<std::int64_t> kept_dups;
    for (std::size_t i = 0; i < packet.timestamps.size(); ++i) {
        const Timestamp t = packet.timestamps[i];
        if (dup_times.count(t.epoch_seconds) && !kept_dups.insert(t.epoch_seconds).second) {
            continue;  // later occurrence of a duplicated timestamp
        }
        out.timestamps.push_back(t);
        for (const auto& [id, col] : packet.columns) {
            double v = i < col.size() ? col[i] : missing_value();
            auto it = blank.find(id);
            if (it != blank.end() && it->second.count(t.epoch_seconds)) v = missing_value();
            out.columns[id].push_back(v);
        }
    }
    return out;
}

std::pair<Stream, std::vector<MergeConflict>> merge_packets(std::vector<DataPacket> packets,
                                                            const std::string& machine_id,
                                                            std::uint32_t nominal_dt_seconds) {
    if (nominal_dt_seconds == 0) throw IntervalError("nominal dt must be positive");
    std::vector<MergeConflict> conflicts;
    if (packets.empty()) {
        return {Stream(machine_id, Timestamp{0}, nominal_dt_seconds, 0), conflicts};
    }

    const std::int64_t dt = nominal_dt_seconds;
    Timestamp min_t{std::numeric_limits<std::int64_t>::max()};
    Timestamp max_t{std::numeric_limits<std::int64_t>::min()};
    bool any_rows = false;
    for (const auto& p : packets) {
        if (p.machine_id != machine_id) {
            throw SchemaError("packet '" + p.packet_id + "' belongs to machine '" +
                              p.machine_id + "', expected '" + machine_id + "'");
        }
        for (const auto& t : p.timestamps) {
            if (((t.epoch_seconds % dt) + dt) % dt != 0) {
                throw IntervalError("packet '" + p.packet_id + "': row " + to_iso8601(t) +
                                    " is off the " + std::to_string(dt) + " s grid");
            }
            min_t = std::min(min_t, t);
            max_t = std::max(max_t, t);
            any_rows = true;
        }
    }
    if (!any_rows) {
        return {Stream(machine_id, Timestamp{0}, nominal_dt_seconds, 0), conflicts};
    }

    // created_at precedence; packet_id breaks ties so that any input
    // permutation produces the identical stream.
    std::sort(packets.begin(), packets.end(), [](const DataPacket& a, const DataPacket& b) {
        if (a.created_at != b.created_at) return a.created_at < b.created_at;
        return a.packet_id < b.packet_id;
    });

    const std::size_t length = static_cast<std::size_t>((max_t - min_t) / dt) + 1;
    Stream stream(machine_id, min_t, nominal_dt_seconds, length);

    // Latest sidecar wins for metadata (values are handled per sample).
    std::map<std::string, ChannelMeta> metas;
    for (const auto& p : packets) {
        for (const auto& cm : p.channels) {
            auto m = cm;
            m.machine_id = machine_id;
            metas[cm.channel_id] = std::move(m);
        }
    }
    for (const auto& [id, meta] : metas) {
        Series s;
        s.meta = meta;
        s.t0 = min_t;
        s.dt_seconds = nominal_dt_seconds;
        s.values.assign(length, missing_value());
        stream.add_channel(std::move(s));
    }

    for (const auto& p : packets) {
        for (const auto& [id, col] : p.columns) {
            auto& dest = stream.channel_mut(id).values;
            const std::size_t n = std::min(col.size(), p.timestamps.size());
            for (std::size_t i = 0; i < n; ++i) {
                const double v = col[i];
                if (is_missing(v)) continue;
                const auto slot = static_cast<std::size_t>((p.timestamps[i] - min_t) / dt);
                double& e = dest[slot];
                if (!is_missing(e) && e != v) {
                    conflicts.push_back({id, p.timestamps[i], e, v});
                }
                e = v;
            }
        }
    }
    return {std::move(stream), std::move(conflicts)};
}

}  // namespace astsa::ingest
