#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "astsa/core.hpp"

namespace astsa::store {

/// On-disk chunk layout, one file per channel per UTC day:
///   magic    6 bytes ASCII "ASTSA1"
///   id_len   u16 LE, byte length of the channel id
///   id       id_len bytes UTF-8
///   t0       i64 LE epoch seconds (always a UTC day start)
///   dt       u32 LE sample interval, divides 86400
///   count    u32 LE number of value slots (86400 / dt)
///   values   count * f64 LE; missing = quiet NaN with zero payload
struct ChunkHeader {
    std::string channel_id;
    Timestamp t0;
    std::uint32_t dt_seconds = 1;
    std::uint32_t count = 0;
};

inline constexpr char kChunkMagic[6] = {'A', 'S', 'T', 'S', 'A', '1'};

/// Serializes one full-day chunk; deterministic byte-for-byte.
std::vector<std::byte> encode_chunk(const ChunkHeader& header, const double* values);

/// Parses and validates a chunk file image. Throws FormatError.
ChunkHeader decode_chunk(const std::vector<std::byte>& bytes, std::vector<double>& values_out);

enum class ExportFormat { csv, ndjson };

/// Day-chunked persistent store under
///   <root>/<machine_id>/<channel_id>/<YYYY-MM-DD>.chunk
/// Writers produce a temp file and rename it into place, so readers
/// never observe a partially written chunk.
class ChunkStore {
public:
    explicit ChunkStore(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }

    /// Persists every day of the stream that holds at least one present
    /// sample. Rewriting identical data is a silent no-op; a chunk whose
    /// bytes would differ from what is on disk raises OverwriteConflict.
    /// Returns the number of chunk files created.
    std::size_t write_stream(const Stream& stream);

    /// Reads [range.start, range.end) for the given channels, stitching
    /// day chunks seamlessly. Grid slots with no chunk on disk are
    /// missing. Throws UnknownChannel when a channel has no directory.
    Stream read_range(const std::string& machine_id, const std::vector<std::string>& channel_ids,
                      const TimeRange& range, std::uint32_t dt_seconds,
                      const std::map<std::string, ChannelMeta>* metas = nullptr) const;

    std::filesystem::path chunk_path(const std::string& machine_id,
                                     const std::string& channel_id, Timestamp day_start) const;

private:
    std::filesystem::path root_;
};

/// Serializes a stream. CSV: header row `timestamp,<id>,...` with empty
/// fields for missing samples. NDJSON: one `{"t":...,"channel":...,"v":...}`
/// object per grid slot per channel, `v` null when missing. Returns
/// bytes written. `channel_order` defaults to lexicographic.
std::size_t export_stream(const Stream& stream, ExportFormat format, std::ostream& sink,
                          const std::vector<std::string>* channel_order = nullptr);

}  // namespace astsa::store
