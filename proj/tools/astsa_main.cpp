#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "astsa/analytics.hpp"
#include "astsa/config.hpp"
#include "astsa/core.hpp"
#include "astsa/derived.hpp"
#include "astsa/ingest.hpp"
#include "astsa/plot.hpp"
#include "astsa/store.hpp"
#include "astsa/symbolize.hpp"
#include "astsa/symquery.hpp"
#include "astsa/testgen.hpp"

namespace {

using namespace astsa;
namespace fs = std::filesystem;

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

TimeRange parse_range(const std::string& from, const std::string& to) {
    return TimeRange(parse_iso8601(from), parse_iso8601(to));
}

std::map<std::string, ChannelMeta> meta_map(const config::MachineConfig& cfg) {
    std::map<std::string, ChannelMeta> metas;
    for (const auto& c : cfg.channels) metas[c.channel_id] = c;
    for (const auto& d : cfg.derived) metas[d.output.channel_id] = d.output;
    return metas;
}

/// Sensor channels that must be read from the store so that every id in
/// `wanted` (sensor or derived) can be produced.
std::vector<std::string> sensor_closure(const config::MachineConfig& cfg,
                                        const std::vector<std::string>& wanted) {
    std::set<std::string> sensors;
    for (const auto& id : wanted) {
        if (const auto* d = cfg.find_derived(id)) {
            for (const auto& ref : derived::referenced_channels(d->tree)) sensors.insert(ref);
        } else if (cfg.find_channel(id)) {
            sensors.insert(id);
        } else {
            throw UnknownChannel("channel '" + id + "' is not in the machine config");
        }
    }
    return {sensors.begin(), sensors.end()};
}

/// Reads the sensor closure of `wanted` and evaluates any derived members.
Stream read_channels(const store::ChunkStore& chunks, const config::MachineConfig& cfg,
                     const std::vector<std::string>& wanted, const TimeRange& range) {
    const auto metas = meta_map(cfg);
    Stream stream = chunks.read_range(cfg.machine_id, sensor_closure(cfg, wanted), range,
                                      cfg.nominal_dt_seconds, &metas);
    for (const auto& id : wanted) {
        if (const auto* d = cfg.find_derived(id)) {
            stream.add_channel(derived::evaluate(*d, stream));
        }
    }
    return stream;
}

void append_number(std::string& buf, double v) {
    char tmp[32];
    const auto [ptr, ec] = std::to_chars(tmp, tmp + sizeof(tmp), v);
    (void)ec;
    buf.append(tmp, ptr);
}

std::string json_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

// ---------------------------------------------------------------- ingest

struct IngestTotals {
    std::size_t packets = 0;
    std::size_t conflicts = 0;
    std::size_t samples_per_channel = 0;
    bool fatal = false;
};

void flush_cluster(std::vector<ingest::DataPacket>& cluster, const config::MachineConfig& cfg,
                   store::ChunkStore& chunks, IngestTotals& totals) {
    if (cluster.empty()) return;
    auto [stream, conflicts] =
        ingest::merge_packets(std::move(cluster), cfg.machine_id, cfg.nominal_dt_seconds);
    cluster.clear();
    totals.conflicts += conflicts.size();
    totals.samples_per_channel += stream.length();
    for (const auto& c : conflicts) {
        std::cerr << "conflict: channel " << c.channel_id << " at " << to_iso8601(c.timestamp)
                  << ": " << c.existing << " vs " << c.incoming << "\n";
    }
    chunks.write_stream(stream);
}

int cmd_ingest(const std::string& config_path, const std::string& packet_dir,
               const std::string& store_root) {
    const config::MachineConfig cfg = config::load_machine_config(config_path);
    store::ChunkStore chunks{fs::path(store_root)};

    std::vector<fs::path> metas;
    if (!packet_dir.empty() && fs::exists(packet_dir)) {
        for (const auto& entry : fs::directory_iterator(packet_dir)) {
            const std::string name = entry.path().filename().string();
            if (name.size() > 10 && name.substr(name.size() - 10) == ".meta.json") {
                metas.push_back(entry.path());
            }
        }
    }
    std::sort(metas.begin(), metas.end());

    IngestTotals totals;
    std::vector<ingest::DataPacket> cluster;
    Timestamp cluster_end{0};

    for (const auto& meta_path : metas) {
        std::string stem = meta_path.filename().string();
        stem.resize(stem.size() - 10);
        const fs::path data_path = meta_path.parent_path() / (stem + ".data.csv");
        ingest::DataPacket packet = ingest::parse_packet(slurp(meta_path), slurp(data_path));
        if (packet.machine_id != cfg.machine_id) {
            throw SchemaError("packet " + packet.packet_id + " belongs to machine '" +
                              packet.machine_id + "', config says '" + cfg.machine_id + "'");
        }
        const ingest::QcReport report = ingest::quality_check(packet);
        for (const auto& v : report.violations) {
            std::cerr << "packet " << packet.packet_id << ": " << to_string(v.rule) << " at "
                      << to_iso8601(v.timestamp) << " (" << v.channel_id << ") " << v.detail
                      << "\n";
        }
        if (!report.accepted) {
            totals.fatal = true;
            continue;
        }
        packet = ingest::sanitize(packet, report);
        ++totals.packets;
        if (packet.timestamps.empty()) continue;

        const Timestamp start = packet.timestamps.front();
        const Timestamp end = packet.timestamps.back() + cfg.nominal_dt_seconds;
        if (!cluster.empty() && start >= cluster_end) {
            flush_cluster(cluster, cfg, chunks, totals);
        }
        if (cluster.empty()) cluster_end = start;
        cluster.push_back(std::move(packet));
        cluster_end = std::max(cluster_end, end);
    }
    if (!totals.fatal) flush_cluster(cluster, cfg, chunks, totals);

    std::cout << totals.packets << " packets, " << totals.conflicts << " conflicts, "
              << totals.samples_per_channel << " samples/channel\n";
    return totals.fatal ? 1 : 0;
}

// ----------------------------------------------------------------- query

int cmd_query(const std::string& config_path, const std::string& store_root,
              std::vector<std::string> channels, const std::string& from, const std::string& to,
              const std::string& format) {
    const config::MachineConfig cfg = config::load_machine_config(config_path);
    store::ChunkStore chunks{fs::path(store_root)};
    if (channels.empty()) {
        for (const auto& c : cfg.channels) channels.push_back(c.channel_id);
    }
    const TimeRange range = parse_range(from, to);
    const Stream stream = read_channels(chunks, cfg, channels, range);
    const auto fmt =
        format == "ndjson" ? store::ExportFormat::ndjson : store::ExportFormat::csv;
    store::export_stream(stream, fmt, std::cout, &channels);
    return 0;
}

// ------------------------------------------------------------- symbolize

symbol::SymbolSequence build_sequence(const store::ChunkStore& chunks,
                                      const config::MachineConfig& cfg,
                                      const std::string& source, const TimeRange& range) {
    std::vector<std::string> inputs;
    const symbol::StateLexicon* slex = cfg.find_state_lexicon(source);
    if (slex) {
        inputs = slex->inputs;
    } else {
        if (!cfg.find_lexicon(source)) {
            throw ConfigError("no lexicon or state lexicon for '" + source + "'");
        }
        inputs.push_back(source);
    }
    std::vector<std::string> wanted = inputs;
    for (const auto& id : inputs) {
        for (const auto& rule : cfg.find_lexicon(id)->adjective_rules) {
            wanted.push_back(rule.channel_id);
        }
    }
    const Stream stream = read_channels(chunks, cfg, wanted, range);

    std::vector<symbol::SymbolSequence> sequences;
    for (const auto& id : inputs) {
        sequences.push_back(symbol::symbolize(stream.channel(id), *cfg.find_lexicon(id),
                                              &stream));
    }
    return slex ? symbol::fuse_states(sequences, *slex) : std::move(sequences.front());
}

void print_sequence_ndjson(const symbol::SymbolSequence& seq, std::ostream& sink) {
    std::string buf;
    for (const auto& tok : seq.tokens) {
        buf += "{\"source\":\"";
        buf += json_escape(seq.source);
        buf += "\",\"kind\":\"";
        buf += symbol::to_string(tok.kind);
        buf += "\",\"label\":\"";
        buf += json_escape(tok.label);
        buf += "\",\"t_start\":\"";
        buf += to_iso8601(tok.t_start);
        buf += "\",\"duration_s\":";
        buf += std::to_string(tok.duration_s);
        if (!tok.qualifiers.empty()) {
            buf += ",\"qualifiers\":{";
            bool first = true;
            for (const auto& [k, v] : tok.qualifiers) {
                if (!first) buf += ',';
                first = false;
                buf += '"';
                buf += json_escape(k);
                buf += "\":\"";
                buf += json_escape(v);
                buf += '"';
            }
            buf += '}';
        }
        buf += "}\n";
        if (buf.size() > 1 << 15) {
            sink.write(buf.data(), static_cast<std::streamsize>(buf.size()));
            buf.clear();
        }
    }
    sink.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

int cmd_symbolize(const std::string& config_path, const std::string& store_root,
                  const std::string& source, const std::string& from, const std::string& to) {
    const config::MachineConfig cfg = config::load_machine_config(config_path);
    store::ChunkStore chunks{fs::path(store_root)};
    const symbol::SymbolSequence seq =
        build_sequence(chunks, cfg, source, parse_range(from, to));
    print_sequence_ndjson(seq, std::cout);
    return 0;
}

// ---------------------------------------------------------------- events

int cmd_events(const std::string& config_path, const std::string& store_root,
               const std::string& pattern_name, const std::string& source_override,
               const std::string& from, const std::string& to, const std::string& report_dir,
               const std::string& plot_dir) {
    const config::MachineConfig cfg = config::load_machine_config(config_path);
    store::ChunkStore chunks{fs::path(store_root)};
    const auto it = cfg.patterns.find(pattern_name);
    if (it == cfg.patterns.end()) {
        throw ConfigError("config declares no pattern named '" + pattern_name + "'");
    }
    const std::string source = source_override.empty() ? it->second.source : source_override;
    if (source.empty()) {
        throw ConfigError("pattern '" + pattern_name + "' has no source; pass --source");
    }
    const TimeRange range = parse_range(from, to);
    const symbol::SymbolSequence seq = build_sequence(chunks, cfg, source, range);
    const query::Pattern pattern = query::parse_pattern(it->second.text);
    const std::vector<analytics::Event> events =
        analytics::detect_events(seq, pattern, cfg.context_window_s);

    std::string buf;
    for (const auto& e : events) {
        buf += "{\"pattern\":\"";
        buf += json_escape(pattern_name);
        buf += "\",\"event_id\":";
        buf += std::to_string(e.event_id);
        buf += ",\"t_event\":\"";
        buf += to_iso8601(e.t_event);
        buf += "\",\"t_start\":\"";
        buf += to_iso8601(e.match.t_start);
        buf += "\",\"t_end\":\"";
        buf += to_iso8601(e.match.t_end);
        buf += "\",\"first_token_index\":";
        buf += std::to_string(e.match.first_token_index);
        buf += ",\"last_token_index\":";
        buf += std::to_string(e.match.last_token_index);
        buf += ",\"clipped\":";
        buf += e.clipped ? "true" : "false";
        buf += "}\n";
    }
    std::cout << buf;

    const std::vector<std::string> report_channels = cfg.effective_report_channels();
    if (!report_dir.empty()) {
        fs::create_directories(report_dir);
        {
            std::ofstream out(fs::path(report_dir) / "timeline.csv",
                              std::ios::binary | std::ios::trunc);
            out << "event_id,t_event,clipped\n";
            for (const auto& e : events) {
                out << e.event_id << ',' << to_iso8601(e.t_event) << ',' << (e.clipped ? 1 : 0)
                    << '\n';
            }
        }
        for (const auto& e : events) {
            char name[32];
            std::snprintf(name, sizeof(name), "event_%04d.csv", e.event_id);
            std::ofstream out(fs::path(report_dir) / name, std::ios::binary | std::ios::trunc);
            analytics::event_report({e}, chunks, cfg.machine_id, report_channels,
                                    cfg.nominal_dt_seconds, out);
            if (!out) throw IoError("cannot write event report");
        }
    }
    if (!plot_dir.empty()) {
        fs::create_directories(plot_dir);
        {
            std::ofstream out(fs::path(plot_dir) / "timeline.svg",
                              std::ios::binary | std::ios::trunc);
            plot::write_event_timeline_svg(events, range, out);
        }
        for (const auto& e : events) {
            const Stream win = read_channels(chunks, cfg, report_channels, e.window);
            char name[32];
            std::snprintf(name, sizeof(name), "event_%04d.svg", e.event_id);
            std::ofstream out(fs::path(plot_dir) / name, std::ios::binary | std::ios::trunc);
            plot::write_event_trace_svg(win, e.t_event, out);
        }
    }
    return 0;
}

// ------------------------------------------------------------- histogram

int cmd_histogram(const std::string& config_path, const std::string& store_root,
                  const std::string& angle_id, const std::string& load_id,
                  const std::string& from, const std::string& to, double bin_width,
                  const std::string& plot_dir) {
    const config::MachineConfig cfg = config::load_machine_config(config_path);
    store::ChunkStore chunks{fs::path(store_root)};
    const TimeRange range = parse_range(from, to);

    // Day-streamed so a year of 1 s data aggregates in bounded memory.
    analytics::PolarHistogram hist(bin_width);
    Timestamp lo = range.start;
    while (lo < range.end) {
        const Timestamp hi = std::min(range.end, lo.day_start() + 86400);
        const Stream day = read_channels(chunks, cfg, {angle_id, load_id}, TimeRange(lo, hi));
        if (day.length() > 0) {
            hist.merge(analytics::polar_histogram(day.channel(angle_id),
                                                  day.channel(load_id), bin_width));
        }
        lo = hi;
    }
    analytics::write_histogram_csv(hist, std::cout);
    if (!plot_dir.empty()) {
        fs::create_directories(plot_dir);
        std::ofstream out(fs::path(plot_dir) / "polar.svg", std::ios::binary | std::ios::trunc);
        plot::write_polar_svg(hist, out);
    }
    return 0;
}

// ---------------------------------------------------------------- faults

int cmd_faults(const std::string& config_path, const std::string& store_root,
               const std::string& channel, const std::string& from, const std::string& to,
               std::size_t max_run, double k, std::size_t half_window) {
    const config::MachineConfig cfg = config::load_machine_config(config_path);
    store::ChunkStore chunks{fs::path(store_root)};
    const Stream stream = read_channels(chunks, cfg, {channel}, parse_range(from, to));
    const analytics::FaultReport report =
        analytics::find_sporadic_faults(stream.channel(channel), max_run, k, half_window);
    std::string buf;
    for (const auto& e : report.entries) {
        buf += "{\"channel\":\"";
        buf += json_escape(report.channel_id);
        buf += "\",\"t\":\"";
        buf += to_iso8601(e.t);
        buf += "\",\"value\":";
        append_number(buf, e.value);
        buf += ",\"rule\":\"";
        buf += analytics::to_string(e.rule);
        buf += "\"}\n";
    }
    std::cout << buf;
    return 0;
}

// --------------------------------------------------------------- testgen

int cmd_testgen(const std::string& spec_path, const std::string& out_dir) {
    const testgen::ScenarioSpec spec = testgen::load_scenario(spec_path);
    const testgen::Manifest manifest = testgen::generate(spec, out_dir);
    std::cout << spec.days << " days, " << manifest.events.size() << " events, "
              << manifest.spikes.size() << " spikes, " << manifest.gaps.size() << " gaps -> "
              << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Telemetry engine: packet ingestion, chunked storage, symbolic analysis"};
    app.require_subcommand(1);

    std::string config_path, store_root, from, to, format = "csv";
    std::string packet_dir, channels_arg, source, pattern_name, report_dir, plot_dir;
    std::string angle_id, load_id, channel, spec_path, out_dir;
    double bin_width = 5.0;
    std::size_t max_run = 5, half_window = 30;
    double k = 8.0;

    auto add_common = [&](CLI::App* cmd, bool with_range) {
        cmd->add_option("--config", config_path, "machine config JSON")->required();
        cmd->add_option("--store", store_root, "chunk store root")->required();
        if (with_range) {
            cmd->add_option("--from", from, "range start, ISO-8601 UTC")->required();
            cmd->add_option("--to", to, "range end (exclusive), ISO-8601 UTC")->required();
        }
    };

    CLI::App* ingest = app.add_subcommand("ingest", "parse, QC, merge and store packets");
    add_common(ingest, false);
    ingest->add_option("dir", packet_dir, "directory of packet pairs")->required();

    CLI::App* query = app.add_subcommand("query", "export stored data");
    add_common(query, true);
    query->add_option("--channels", channels_arg, "comma-separated channel ids");
    query->add_option("--format", format, "csv or ndjson")
        ->check(CLI::IsMember({"csv", "ndjson"}));

    CLI::App* symbolize = app.add_subcommand("symbolize", "emit the symbol sequence");
    add_common(symbolize, true);
    symbolize->add_option("--source", source, "channel or state lexicon id")->required();

    CLI::App* events = app.add_subcommand("events", "run a named pattern, report events");
    add_common(events, true);
    events->add_option("--pattern", pattern_name, "pattern name from the config")->required();
    events->add_option("--source", source, "override the pattern's source");
    events->add_option("--report", report_dir, "write per-event CSV reports here");
    events->add_option("--plot", plot_dir, "write SVG plots here");

    CLI::App* histogram = app.add_subcommand("histogram", "polar histogram of load vs angle");
    add_common(histogram, true);
    histogram->add_option("--angle", angle_id, "angle channel")->required();
    histogram->add_option("--load", load_id, "load channel")->required();
    histogram->add_option("--bin-width", bin_width, "bin width in degrees");
    histogram->add_option("--plot", plot_dir, "write polar.svg here");

    CLI::App* faults = app.add_subcommand("faults", "sporadic sensor-fault scan");
    add_common(faults, true);
    faults->add_option("--channel", channel, "channel to scan")->required();
    faults->add_option("--max-run", max_run, "longest run still considered a glitch");
    faults->add_option("--k", k, "MAD multiplier");
    faults->add_option("--half-window", half_window, "half window in samples");

    CLI::App* testgen_cmd = app.add_subcommand("testgen", "generate a synthetic scenario");
    testgen_cmd->add_option("--spec", spec_path, "scenario spec JSON")->required();
    testgen_cmd->add_option("--out", out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(ingest)) return cmd_ingest(config_path, packet_dir, store_root);
        if (app.got_subcommand(query)) {
            std::vector<std::string> channels;
            std::stringstream ss(channels_arg);
            std::string item;
            while (std::getline(ss, item, ',')) {
                if (!item.empty()) channels.push_back(item);
            }
            return cmd_query(config_path, store_root, channels, from, to, format);
        }
        if (app.got_subcommand(symbolize)) {
            return cmd_symbolize(config_path, store_root, source, from, to);
        }
        if (app.got_subcommand(events)) {
            return cmd_events(config_path, store_root, pattern_name, source, from, to,
                              report_dir, plot_dir);
        }
        if (app.got_subcommand(histogram)) {
            return cmd_histogram(config_path, store_root, angle_id, load_id, from, to,
                                 bin_width, plot_dir);
        }
        if (app.got_subcommand(faults)) {
            return cmd_faults(config_path, store_root, channel, from, to, max_run, k,
                              half_window);
        }
        if (app.got_subcommand(testgen_cmd)) return cmd_testgen(spec_path, out_dir);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
