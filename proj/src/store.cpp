#include "astsa/store.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <ostream>

namespace astsa::store {

namespace fs = std::filesystem;

namespace {

// Canonical quiet NaN so that chunk files are byte-identical across
// writers regardless of how a gap was produced.
constexpr std::uint64_t kCanonicalNaN = 0x7ff8000000000000ull;

void put_u16(std::vector<std::byte>& out, std::uint16_t v) {
    out.push_back(static_cast<std::byte>(v & 0xff));
    out.push_back(static_cast<std::byte>((v >> 8) & 0xff));
}

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xff));
}

void put_u64(std::vector<std::byte>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::byte* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(std::to_integer<std::uint8_t>(p[i])) << (8 * i);
    return v;
}

std::uint32_t get_u32(const std::byte* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(std::to_integer<std::uint8_t>(p[i])) << (8 * i);
    return v;
}

std::uint16_t get_u16(const std::byte* p) {
    return static_cast<std::uint16_t>(std::to_integer<std::uint8_t>(p[0]) |
                                      (std::to_integer<std::uint8_t>(p[1]) << 8));
}

std::vector<std::byte> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    in.seekg(0, std::ios::end);
    const auto size = in.tellg();
    in.seekg(0);
    std::vector<std::byte> bytes(static_cast<std::size_t>(size));
    if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), size)) {
        throw IoError("short read on '" + path.string() + "'");
    }
    return bytes;
}

}  // namespace

std::vector<std::byte> encode_chunk(const ChunkHeader& header, const double* values) {
    std::vector<std::byte> out;
    out.reserve(24 + header.channel_id.size() + header.count * 8);
    for (char c : kChunkMagic) out.push_back(static_cast<std::byte>(c));
    if (header.channel_id.size() > 0xffff) throw FormatError("channel id too long");
    put_u16(out, static_cast<std::uint16_t>(header.channel_id.size()));
    for (char c : header.channel_id) out.push_back(static_cast<std::byte>(c));
    put_u64(out, static_cast<std::uint64_t>(header.t0.epoch_seconds));
    put_u32(out, header.dt_seconds);
    put_u32(out, header.count);
    for (std::uint32_t i = 0; i < header.count; ++i) {
        const double v = values[i];
        put_u64(out, is_missing(v) ? kCanonicalNaN : std::bit_cast<std::uint64_t>(v));
    }
    return out;
}

ChunkHeader decode_chunk(const std::vector<std::byte>& bytes, std::vector<double>& values_out) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kChunkMagic, 6) != 0) {
        throw FormatError("bad chunk magic");
    }
    std::size_t pos = 6;
    const std::uint16_t id_len = get_u16(bytes.data() + pos);
    pos += 2;
    if (bytes.size() < pos + id_len + 16) throw FormatError("truncated chunk header");
    ChunkHeader h;
    h.channel_id.assign(reinterpret_cast<const char*>(bytes.data() + pos), id_len);
    pos += id_len;
    h.t0 = Timestamp{static_cast<std::int64_t>(get_u64(bytes.data() + pos))};
    pos += 8;
    h.dt_seconds = get_u32(bytes.data() + pos);
    pos += 4;
    h.count = get_u32(bytes.data() + pos);
    pos += 4;
    if (bytes.size() != pos + static_cast<std::size_t>(h.count) * 8) {
        throw FormatError("chunk size does not match header count");
    }
    values_out.resize(h.count);
    for (std::uint32_t i = 0; i < h.count; ++i) {
        values_out[i] = std::bit_cast<double>(get_u64(bytes.data() + pos + i * 8));
    }
    return h;
}

ChunkStore::ChunkStore(fs::path root) : root_(std::move(root)) {}

fs::path ChunkStore::chunk_path(const std::string& machine_id, const std::string& channel_id,
                                Timestamp day_start) const {
    return root_ / machine_id / channel_id / (to_iso8601(day_start).substr(0, 10) + ".chunk");
}

std::size_t ChunkStore::write_stream(const Stream& stream) {
    if (stream.length() == 0 || stream.channel_count() == 0) return 0;
    const std::uint32_t dt = stream.dt_seconds();
    if (86400 % dt != 0) {
        throw IntervalError("dt " + std::to_string(dt) + " does not divide a day");
    }
    if (((stream.t0().epoch_seconds % dt) + dt) % dt != 0) {
        throw IntervalError("stream t0 is not aligned to the dt grid");
    }
    const std::uint32_t slots_per_day = 86400 / dt;
    std::size_t written = 0;

    const Timestamp first_day = stream.t0().day_start();
    const Timestamp end = stream.end();

    std::error_code ec;
    for (const auto& [id, series] : stream.channels()) {
        const fs::path dir = root_ / stream.machine_id() / id;
        fs::create_directories(dir, ec);
        if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());

        std::vector<double> day(slots_per_day);
        for (Timestamp d = first_day; d < end; d = d + 86400) {
            bool any_present = false;
            for (std::uint32_t s = 0; s < slots_per_day; ++s) {
                const double v = series.value_at(d + static_cast<std::int64_t>(s) * dt);
                day[s] = v;
                any_present |= !is_missing(v);
            }
            if (!any_present) continue;  // absent chunk already means all-missing

            ChunkHeader h{id, d, dt, slots_per_day};
            const std::vector<std::byte> bytes = encode_chunk(h, day.data());
            const fs::path path = chunk_path(stream.machine_id(), id, d);
            if (fs::exists(path)) {
                if (read_file(path) == bytes) continue;  // idempotent rewrite
                throw OverwriteConflict("chunk '" + path.string() +
                                        "' already exists with different data");
            }
            const fs::path tmp = path.string() + ".tmp";
            {
                std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
                if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
                out.write(reinterpret_cast<const char*>(bytes.data()),
                          static_cast<std::streamsize>(bytes.size()));
                if (!out) throw IoError("short write on '" + tmp.string() + "'");
            }
            fs::rename(tmp, path, ec);
            if (ec) throw IoError("cannot move chunk into place: " + ec.message());
            ++written;
        }
    }
    return written;
}

Stream ChunkStore::read_range(const std::string& machine_id,
                              const std::vector<std::string>& channel_ids,
                              const TimeRange& range, std::uint32_t dt_seconds,
                              const std::map<std::string, ChannelMeta>* metas) const {
    if (dt_seconds == 0 || 86400 % dt_seconds != 0) {
        throw IntervalError("dt must be positive and divide a day");
    }
    const std::int64_t dt = dt_seconds;
    // First grid slot >= start, grid anchored at the epoch.
    auto ceil_div = [](std::int64_t a, std::int64_t b) {
        return a / b + ((a % b != 0 && (a ^ b) >= 0) ? 1 : 0);
    };
    const Timestamp t0{ceil_div(range.start.epoch_seconds, dt) * dt};
    std::size_t length = 0;
    if (t0 < range.end) {
        length = static_cast<std::size_t>(ceil_div(range.end - t0, dt));
    }

    Stream out(machine_id, t0, dt_seconds, length);
    const std::uint32_t slots_per_day = 86400 / dt_seconds;

    for (const auto& id : channel_ids) {
        const fs::path dir = root_ / machine_id / id;
        if (!fs::exists(dir)) {
            throw UnknownChannel("no stored data for channel '" + id + "' of machine '" +
                                 machine_id + "'");
        }
        Series s;
        if (metas && metas->count(id)) {
            s.meta = metas->at(id);
        } else {
            s.meta.channel_id = id;
            s.meta.machine_id = machine_id;
            s.meta.name = id;
            s.meta.phys_min = -std::numeric_limits<double>::infinity();
            s.meta.phys_max = std::numeric_limits<double>::infinity();
        }
        s.t0 = t0;
        s.dt_seconds = dt_seconds;
        s.values.assign(length, missing_value());

        if (length > 0) {
            const Timestamp last = t0 + static_cast<std::int64_t>(length - 1) * dt;
            std::vector<double> day_values;
            for (Timestamp d = t0.day_start(); d <= last; d = d + 86400) {
                const fs::path path = chunk_path(machine_id, id, d);
                if (!fs::exists(path)) continue;
                const ChunkHeader h = decode_chunk(read_file(path), day_values);
                if (h.channel_id != id || h.t0 != d || h.dt_seconds != dt_seconds ||
                    h.count != slots_per_day) {
                    throw FormatError("chunk '" + path.string() + "' does not match its path");
                }
                // Overlap of this day with the requested slot window.
                for (std::uint32_t slot = 0; slot < slots_per_day; ++slot) {
                    const Timestamp ts = d + static_cast<std::int64_t>(slot) * dt;
                    if (ts < t0) continue;
                    const auto idx = static_cast<std::size_t>((ts - t0) / dt);
                    if (idx >= length) break;
                    s.values[idx] = day_values[slot];
                }
            }
        }
        out.add_channel(std::move(s));
    }
    return out;
}

namespace {

std::size_t write_all(std::ostream& sink, const std::string& buf) {
    sink.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!sink) throw IoError("export sink write failed");
    return buf.size();
}

void append_number(std::string& buf, double v) {
    char tmp[32];
    const auto [ptr, ec] = std::to_chars(tmp, tmp + sizeof(tmp), v);
    (void)ec;
    buf.append(tmp, ptr);
}

}  // namespace

std::size_t export_stream(const Stream& stream, ExportFormat format, std::ostream& sink,
                          const std::vector<std::string>* channel_order) {
    std::vector<std::string> order;
    if (channel_order) {
        order = *channel_order;
        for (const auto& id : order) stream.channel(id);  // validate
    } else {
        for (const auto& [id, s] : stream.channels()) order.push_back(id);
    }

    std::size_t bytes = 0;
    std::string buf;
    buf.reserve(1 << 16);

    if (format == ExportFormat::csv) {
        buf = "timestamp";
        for (const auto& id : order) {
            buf += ',';
            buf += id;
        }
        buf += '\n';
        std::vector<const Series*> cols;
        for (const auto& id : order) cols.push_back(&stream.channel(id));
        for (std::size_t i = 0; i < stream.length(); ++i) {
            buf += to_iso8601(stream.t0() + static_cast<std::int64_t>(i) * stream.dt_seconds());
            for (const Series* s : cols) {
                buf += ',';
                const double v = s->values[i];
                if (!is_missing(v)) append_number(buf, v);
            }
            buf += '\n';
            if (buf.size() > (1 << 16) - 256) {
                bytes += write_all(sink, buf);
                buf.clear();
            }
        }
    } else {
        std::vector<const Series*> cols;
        for (const auto& id : order) cols.push_back(&stream.channel(id));
        for (std::size_t i = 0; i < stream.length(); ++i) {
            const std::string ts =
                to_iso8601(stream.t0() + static_cast<std::int64_t>(i) * stream.dt_seconds());
            for (std::size_t c = 0; c < cols.size(); ++c) {
                buf += "{\"t\":\"";
                buf += ts;
                buf += "\",\"channel\":\"";
                buf += order[c];
                buf += "\",\"v\":";
                const double v = cols[c]->values[i];
                if (is_missing(v)) {
                    buf += "null";
                } else {
                    append_number(buf, v);
                }
                buf += "}\n";
            }
            if (buf.size() > (1 << 16) - 512) {
                bytes += write_all(sink, buf);
                buf.clear();
            }
        }
    }
    bytes += write_all(sink, buf);
    return bytes;
}

}  // namespace astsa::store
