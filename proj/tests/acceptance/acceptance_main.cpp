// Acceptance gate: every release-blocking capability exercised end to end
// on generated corpora with ground-truth manifests. Each criterion prints
// exactly one [PASS]/[FAIL] line; the exit code is the failure count.

#include <sys/resource.h>
#include <sys/wait.h>

#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "astsa/analytics.hpp"
#include "astsa/config.hpp"
#include "astsa/derived.hpp"
#include "astsa/ingest.hpp"
#include "astsa/store.hpp"
#include "astsa/symbolize.hpp"
#include "astsa/symquery.hpp"
#include "astsa/testgen.hpp"

#include "support/oracle_matcher.hpp"
#include "support/random_symbols.hpp"

#ifndef ASTSA_CLI_PATH
#error "ASTSA_CLI_PATH must point at the astsa binary"
#endif

using namespace astsa;
namespace fs = std::filesystem;
namespace tg = astsa::testgen;
using Clock = std::chrono::steady_clock;

namespace {

// ------------------------------------------------------------- harness

struct Fail : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void expect(bool cond, const std::string& msg) {
    if (!cond) throw Fail(msg);
}

int g_failures = 0;

void criterion(int no, const std::string& title, const std::function<std::string()>& body) {
    const auto start = Clock::now();
    std::string verdict, detail;
    try {
        detail = body();
        verdict = "[PASS]";
    } catch (const std::exception& e) {
        detail = e.what();
        verdict = "[FAIL]";
        ++g_failures;
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    char line[512];
    std::snprintf(line, sizeof(line), "%s %d. %s: %s (%.1f s)\n", verdict.c_str(), no,
                  title.c_str(), detail.c_str(), secs);
    std::fputs(line, stdout);
    std::fflush(stdout);
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

long max_rss_kib() {
    struct rusage u {};
    getrusage(RUSAGE_SELF, &u);
    return u.ru_maxrss;
}

// ----------------------------------------------------------- cli runner

struct CliResult {
    int rc = -1;
    std::string out;
    std::string err;
};

CliResult run_cli(const std::string& args) {
    static int seq = 0;
    const fs::path err_path = fs::temp_directory_path() /
                              ("astsa_accept_err_" + std::to_string(::getpid()) + "_" +
                               std::to_string(++seq));
    const std::string cmd =
        std::string(ASTSA_CLI_PATH) + " " + args + " 2>" + err_path.string();
    CliResult r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    expect(pipe != nullptr, "popen failed");
    char buf[1 << 16];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, n);
    const int status = ::pclose(pipe);
    r.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream err_in(err_path);
    std::ostringstream err_buf;
    err_buf << err_in.rdbuf();
    r.err = err_buf.str();
    fs::remove(err_path);
    return r;
}

CliResult run_cli_ok(const std::string& args) {
    CliResult r = run_cli(args);
    expect(r.rc == 0, "cli exited " + std::to_string(r.rc) + ": " + r.err.substr(0, 200));
    return r;
}

// ----------------------------------------------------------- workspace

fs::path g_root;

std::string path_of(const std::string& leaf) { return (g_root / leaf).string(); }

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
    expect(out.good(), "cannot write " + p.string());
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) out.push_back(line);
    return out;
}

std::string num_str(double v) {
    char tmp[32];
    const auto [ptr, ec] = std::to_chars(tmp, tmp + sizeof(tmp), v);
    (void)ec;
    return std::string(tmp, ptr);
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

constexpr std::int64_t kStart = 1740787200;  // 2025-03-01T00:00:00Z

// ------------------------------------------------- 1. stream assembly

std::string c1_assembly() {
    const fs::path packets = g_root / "c1_packets";
    const fs::path store_root = g_root / "c1_store";
    const std::string cfg = path_of("c1_machine.json");
    write_file(cfg, R"({
      "machine_id": "acc1", "nominal_dt_seconds": 1,
      "channels": [
        {"channel_id": "press", "unit": "bar", "phys_min": 0, "phys_max": 400},
        {"channel_id": "flow", "unit": "l/min", "phys_min": -130, "phys_max": 130}
      ]
    })");
    const auto spec = tg::parse_scenario(R"({
      "seed": 11, "machine_id": "acc1", "start": "2025-03-01T00:00:00Z", "days": 3,
      "channels": [
        {"channel_id": "press", "unit": "bar", "phys_min": 0, "phys_max": 400,
         "generator": "constant", "params": {"base": 10, "noise": 0.5}},
        {"channel_id": "flow", "unit": "l/min", "phys_min": -130, "phys_max": 130,
         "generator": "sinusoid", "params": {"base": 50, "amplitude": 20,
                                             "period_s": 7200, "noise": 1}}
      ]
    })", "c1");
    tg::generate(spec, packets);

    const auto t0 = Clock::now();
    const auto ing = run_cli_ok("ingest --config " + cfg + " --store " + store_root.string() +
                                " " + packets.string());
    const double ingest_s = seconds_since(t0);
    expect(ing.out == "3 packets, 0 conflicts, 259200 samples/channel\n",
           "unexpected ingest summary: " + ing.out);

    store::ChunkStore chunks(store_root);
    const TimeRange full({kStart}, {kStart + 3 * 86400});
    const Stream merged = chunks.read_range("acc1", {"press", "flow"}, full, 1);
    expect(merged.length() == 259200, "stream length " + std::to_string(merged.length()));
    for (const auto& id : {"press", "flow"}) {
        const CoverageStats cov = coverage_stats(merged.channel(id));
        expect(cov.present == 259200, std::string(id) + " present " +
                                          std::to_string(cov.present));
        expect(cov.missing == 0, std::string(id) + " has seams");
        expect(cov.longest_gap_seconds == 0, std::string(id) + " has gaps");
    }
    expect(ingest_s < 10.0, fmt("ingest took %.1f s (budget 10 s)", ingest_s));

    fs::remove_all(packets);
    fs::remove_all(store_root);
    return fmt("259200 samples/channel x2, 0 conflicts, 0 seams, ingest %.1f s", ingest_s);
}

// ------------------------------------------------ 2. incident analysis

std::string c2_incidents() {
    const fs::path packets = g_root / "c2_packets";
    const fs::path store_root = g_root / "c2_store";
    const fs::path report_dir = g_root / "c2_report";
    const std::string cfg = path_of("c2_machine.json");

    std::string channels_cfg, channels_scn;
    for (int i = 0; i < 10; ++i) {
        const std::string id = "ch" + std::to_string(i);
        if (i) {
            channels_cfg += ",";
            channels_scn += ",";
        }
        channels_cfg += "{\"channel_id\": \"" + id +
                        "\", \"phys_min\": 0, \"phys_max\": 400}";
        channels_scn += "{\"channel_id\": \"" + id +
                        "\", \"phys_min\": 0, \"phys_max\": 400, \"generator\": \"constant\","
                        " \"params\": {\"base\": 10, \"noise\": 0.5}}";
    }
    write_file(cfg, R"({
      "machine_id": "acc2", "nominal_dt_seconds": 1,
      "channels": [)" + channels_cfg + R"(],
      "lexicons": [
        {"channel_id": "ch0",
         "noun_bins": [
           {"upper_bound": 50, "label": "normal"},
           {"upper_bound": 150, "label": "elevated"},
           {"upper_bound": "inf", "label": "critical"}
         ],
         "hysteresis": 1}
      ],
      "patterns": {
        "anomalous_op": {"text": "verb:goto_elevated ~{0,60} verb:goto_critical",
                         "source": "ch0"}
      },
      "context_window_s": 300
    })");
    const auto spec = tg::parse_scenario(R"({
      "seed": 22, "machine_id": "acc2", "start": "2025-03-01T00:00:00Z", "days": 61,
      "self_check": false,
      "channels": [)" + channels_scn + R"(],
      "injections": [
        {"kind": "event_pattern", "channel_id": "ch0", "count": 63,
         "steps": [{"value": 100, "hold_s": 20}, {"value": 200, "hold_s": 10}]}
      ]
    })", "c2");
    const tg::Manifest manifest = tg::generate(spec, packets);
    expect(manifest.events.size() == 63, "generator produced wrong event count");

    const auto t_ing = Clock::now();
    const auto ing = run_cli_ok("ingest --config " + cfg + " --store " + store_root.string() +
                                " " + packets.string());
    const double ingest_s = seconds_since(t_ing);
    expect(ing.out == "61 packets, 0 conflicts, 5270400 samples/channel\n",
           "unexpected ingest summary: " + ing.out);
    fs::remove_all(packets);

    const std::string range = " --from 2025-03-01T00:00:00Z --to 2025-05-01T00:00:00Z";
    const std::string common = "--config " + cfg + " --store " + store_root.string();
    const auto t_det = Clock::now();
    const auto det = run_cli_ok("events " + common + " --pattern anomalous_op" + range);
    const double detect_s = seconds_since(t_det);
    const auto rows = lines_of(det.out);
    expect(rows.size() == 63, "detected " + std::to_string(rows.size()) + " events, want 63");

    std::vector<Timestamp> window_ends;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::string& row = rows[i];
        const auto field = [&](const std::string& key) {
            const std::string tag = "\"" + key + "\":\"";
            const auto pos = row.find(tag);
            expect(pos != std::string::npos, "missing field " + key);
            const auto end = row.find('"', pos + tag.size());
            return row.substr(pos + tag.size(), end - pos - tag.size());
        };
        const Timestamp t_event = parse_iso8601(field("t_event"));
        expect(t_event == manifest.events[i].t_event,
               "event " + std::to_string(i + 1) + " at " + field("t_event") + ", manifest says " +
                   to_iso8601(manifest.events[i].t_event));
        expect(row.find("\"clipped\":false") != std::string::npos, "event clipped");
        window_ends.push_back(parse_iso8601(field("t_end")));
    }
    expect(detect_s < 120.0, fmt("detection took %.1f s (budget 120 s)", detect_s));

    // Re-run with --report and audit every 300 s window slice bit-exactly.
    run_cli_ok("events " + common + " --pattern anomalous_op" + range + " --report " +
               report_dir.string());
    store::ChunkStore chunks(store_root);
    std::vector<std::string> channel_ids;
    for (int i = 0; i < 10; ++i) channel_ids.push_back("ch" + std::to_string(i));
    std::size_t audited_rows = 0;
    for (std::size_t e = 0; e < window_ends.size(); ++e) {
        char name[32];
        std::snprintf(name, sizeof(name), "event_%04zu.csv", e + 1);
        std::ifstream in(report_dir / name);
        expect(in.good(), std::string("missing ") + name);
        std::ostringstream buf;
        buf << in.rdbuf();
        const auto report_lines = lines_of(buf.str());

        const TimeRange window({window_ends[e].epoch_seconds - 300}, window_ends[e]);
        const Stream win = chunks.read_range("acc2", channel_ids, window, 1);
        std::vector<std::string> want;
        want.push_back("event_id,t_event,clipped");
        want.push_back(std::to_string(e + 1) + "," +
                       to_iso8601({window_ends[e].epoch_seconds - 1}) + ",0");
        want.push_back("");
        want.push_back("event_id,channel,timestamp,value");
        for (const auto& id : channel_ids) {
            const Series& s = win.channel(id);
            for (std::size_t i = 0; i < s.size(); ++i) {
                std::string row = std::to_string(e + 1) + "," + id + "," +
                                  to_iso8601(s.timestamp_at(i)) + ",";
                if (!is_missing(s.values[i])) row += num_str(s.values[i]);
                want.push_back(std::move(row));
                ++audited_rows;
            }
        }
        expect(report_lines == want, std::string(name) + " diverges from stored data");
    }

    fs::remove_all(store_root);
    fs::remove_all(report_dir);
    return fmt("63/63 events at manifest instants, %zu window rows bit-exact, detect %.1f s"
               " (ingest %.1f s)",
               audited_rows, detect_s, ingest_s);
}

// --------------------------------------------- 3+4. year-scale corpus

struct YearCorpus {
    fs::path store_root;
    tg::Manifest manifest;
    bool ready = false;
    double ingest_s = 0.0;
};

YearCorpus g_year;

void build_year_corpus() {
    const fs::path packets = g_root / "c3_packets";
    g_year.store_root = g_root / "c3_store";
    const std::string cfg = path_of("c3_machine.json");
    write_file(cfg, R"({
      "machine_id": "acc3", "nominal_dt_seconds": 1,
      "channels": [
        {"channel_id": "angle", "unit": "deg", "phys_min": 0, "phys_max": 360},
        {"channel_id": "load", "phys_min": 0, "phys_max": 1000}
      ]
    })");
    const auto spec = tg::parse_scenario(R"({
      "seed": 33, "machine_id": "acc3", "start": "2025-01-01T00:00:00Z", "days": 365,
      "self_check": false,
      "channels": [
        {"channel_id": "angle", "unit": "deg", "phys_min": 0, "phys_max": 360,
         "generator": "constant", "params": {"base": 0}},
        {"channel_id": "load", "phys_min": 0, "phys_max": 1000,
         "generator": "constant", "params": {"base": 500}}
      ],
      "injections": [
        {"kind": "quadrant_bias", "angle_channel": "angle", "load_channel": "load",
         "quadrant": 1, "target_share": 0.32, "load_base": 500, "load_noise": 5},
        {"kind": "gap", "channels": ["angle"], "day": 200, "start_s": 3600,
         "duration_s": 7200}
      ]
    })", "c3");
    g_year.manifest = tg::generate(spec, packets);

    const auto t0 = Clock::now();
    const auto ing = run_cli_ok("ingest --config " + cfg + " --store " +
                                g_year.store_root.string() + " " + packets.string());
    g_year.ingest_s = seconds_since(t0);
    expect(ing.out == "365 packets, 0 conflicts, 31536000 samples/channel\n",
           "unexpected ingest summary: " + ing.out);
    fs::remove_all(packets);
    g_year.ready = true;
}

std::string c3_year_histogram() {
    build_year_corpus();
    const std::int64_t year_start = parse_iso8601("2025-01-01T00:00:00Z").epoch_seconds;
    store::ChunkStore chunks(g_year.store_root);

    const auto t0 = Clock::now();
    analytics::PolarHistogram total(5.0);
    for (int day = 0; day < 365; ++day) {
        const TimeRange r({year_start + day * 86400ll}, {year_start + (day + 1) * 86400ll});
        const Stream s = chunks.read_range("acc3", {"angle", "load"}, r, 1);
        total.merge(analytics::polar_histogram(s.channel("angle"), s.channel("load"), 5.0));
    }
    const double agg_s = seconds_since(t0);
    const long rss_kib = max_rss_kib();

    const std::uint64_t expected = 31536000ull - g_year.manifest.gap_samples;
    expect(total.total_samples() == expected,
           fmt("histogram holds %llu pairs, manifest says %llu",
               static_cast<unsigned long long>(total.total_samples()),
               static_cast<unsigned long long>(expected)));
    expect(g_year.manifest.quadrant &&
               total.total_samples() == g_year.manifest.quadrant->expected_pairs,
           "pair count diverges from manifest quadrant truth");

    // Brute-force tally of one day must agree bin by bin.
    const TimeRange day100({year_start + 100 * 86400ll}, {year_start + 101 * 86400ll});
    const Stream sub = chunks.read_range("acc3", {"angle", "load"}, day100, 1);
    const auto& angles = sub.channel("angle").values;
    const auto& loads = sub.channel("load").values;
    std::vector<std::uint64_t> brute(72, 0);
    for (std::size_t i = 0; i < angles.size(); ++i) {
        if (is_missing(angles[i]) || is_missing(loads[i])) continue;
        double a = std::fmod(angles[i], 360.0);
        if (a < 0) a += 360.0;
        auto idx = static_cast<std::size_t>(a / 5.0);
        if (idx >= 72) idx = 71;
        ++brute[idx];
    }
    const analytics::PolarHistogram one_day =
        analytics::polar_histogram(sub.channel("angle"), sub.channel("load"), 5.0);
    for (std::size_t b = 0; b < 72; ++b) {
        expect(one_day.bins()[b].count == brute[b],
               fmt("bin %zu: histogram %llu vs brute force %llu", b,
                   static_cast<unsigned long long>(one_day.bins()[b].count),
                   static_cast<unsigned long long>(brute[b])));
    }

    expect(agg_s < 300.0, fmt("aggregation took %.1f s (budget 300 s)", agg_s));
    expect(rss_kib < 1048576, fmt("peak rss %ld KiB (budget 1 GiB)", rss_kib));
    return fmt("%llu pairs (gap-adjusted), day subsample bin-exact, %.1f s, rss %ld MiB"
               " (ingest %.1f s)",
               static_cast<unsigned long long>(total.total_samples()), agg_s, rss_kib / 1024,
               g_year.ingest_s);
}

std::string c4_quadrant_share() {
    expect(g_year.ready, "year corpus unavailable (criterion 3 setup failed)");
    const std::int64_t year_start = parse_iso8601("2025-01-01T00:00:00Z").epoch_seconds;
    store::ChunkStore chunks(g_year.store_root);
    const TimeRange full({year_start}, {year_start + 365 * 86400ll});
    const Stream s = chunks.read_range("acc3", {"angle", "load"}, full, 1);
    const analytics::DailyVsAggregate r =
        analytics::daily_vs_aggregate(s.channel("angle"), s.channel("load"), 5.0, 1);

    expect(std::fabs(r.annual_quadrant_share - 0.32) <= 0.01,
           fmt("annual share %.4f outside 0.32 +- 0.01", r.annual_quadrant_share));
    // The manifest share counts dwell samples; the analysis shares the load
    // sum. With angle-independent load the two agree up to sampling noise.
    const auto& truth = *g_year.manifest.quadrant;
    expect(std::fabs(r.annual_quadrant_share - truth.constructed_share) < 1e-3,
           fmt("load-sum share %.6f far from the constructed dwell share %.6f",
               r.annual_quadrant_share, truth.constructed_share));

    expect(r.daily_means.size() == 365, "expected 365 daily means");
    std::size_t in_band = 0;
    for (double m : r.daily_means) {
        if (!is_missing(m) && m >= truth.daily_band_min && m <= truth.daily_band_max) {
            ++in_band;
        }
    }
    const double frac = static_cast<double>(in_band) / 365.0;
    expect(frac >= 0.95, fmt("only %.1f%% of daily means inside the noise band", frac * 100));

    fs::remove_all(g_year.store_root);
    g_year.ready = false;
    return fmt("annual share %.4f (target 0.32 +- 0.01), %zu/365 daily means in band",
               r.annual_quadrant_share, in_band);
}

// ------------------------------------------------ 5. commissioning scan

std::string c5_sporadic_faults() {
    const fs::path packets = g_root / "c5_packets";
    const auto spec = tg::parse_scenario(R"({
      "seed": 55, "machine_id": "acc5", "start": "2025-03-01T00:00:00Z", "days": 30,
      "channels": [
        {"channel_id": "sp", "phys_min": 0, "phys_max": 400,
         "generator": "constant", "params": {"base": 50, "noise": 1}}
      ],
      "injections": [
        {"kind": "sporadic_spike", "channel_id": "sp", "magnitude": 100,
         "per_day_min": 2, "per_day_max": 5, "min_separation_s": 300}
      ]
    })", "c5");
    const tg::Manifest manifest = tg::generate(spec, packets);

    std::vector<ingest::DataPacket> parsed;
    std::vector<fs::path> metas;
    for (const auto& entry : fs::directory_iterator(packets)) {
        if (entry.path().extension() == ".json" &&
            entry.path().filename() != "manifest.json") {
            metas.push_back(entry.path());
        }
    }
    std::sort(metas.begin(), metas.end());
    for (const auto& meta_path : metas) {
        std::string stem = meta_path.filename().string();
        stem.resize(stem.size() - std::string(".meta.json").size());
        const auto slurp = [](const fs::path& p) {
            std::ifstream in(p, std::ios::binary);
            std::ostringstream buf;
            buf << in.rdbuf();
            return buf.str();
        };
        auto packet = ingest::parse_packet(slurp(meta_path),
                                           slurp(packets / (stem + ".data.csv")));
        const auto qc = ingest::quality_check(packet);
        expect(qc.accepted && qc.violations.empty(), "generated packet failed QC");
        parsed.push_back(std::move(packet));
    }
    expect(parsed.size() == 30, "expected 30 daily packets");
    auto [stream, conflicts] = ingest::merge_packets(std::move(parsed), "acc5", 1);
    expect(conflicts.empty(), "unexpected merge conflicts");

    const analytics::FaultReport report =
        analytics::find_sporadic_faults(stream.channel("sp"), 5, 8.0, 30);
    std::vector<Timestamp> truth;
    for (const auto& s : manifest.spikes) truth.push_back(s.t);
    const std::vector<Timestamp> found = report.fault_timestamps();

    std::size_t missed = 0, false_flags = 0;
    std::set<std::int64_t> truth_set, found_set;
    for (const auto& t : truth) truth_set.insert(t.epoch_seconds);
    for (const auto& t : found) found_set.insert(t.epoch_seconds);
    for (const auto& t : truth_set) missed += found_set.count(t) == 0;
    for (const auto& t : found_set) false_flags += truth_set.count(t) == 0;
    expect(missed == 0, std::to_string(missed) + " injected spikes missed");
    expect(false_flags == 0, std::to_string(false_flags) + " clean samples flagged");
    for (const auto& e : report.entries) {
        expect(e.rule == analytics::FaultRule::LocalOutlier, "unexpected fault rule");
    }

    fs::remove_all(packets);
    return fmt("%zu injected spikes over 30 days: 0 missed, 0 false flags", truth.size());
}

// --------------------------------------------- 6. symbolizer invariants

struct RandomLexicon {
    symbol::Lexicon lex;
    std::vector<double> bounds;  // finite upper bounds
};

RandomLexicon random_lexicon(std::mt19937_64& rng, const std::string& channel_id,
                             std::uint32_t dt) {
    RandomLexicon out;
    out.lex.channel_id = channel_id;
    std::uniform_int_distribution<int> bins_d(1, 4);
    std::uniform_real_distribution<double> base_d(-50.0, 50.0);
    std::uniform_real_distribution<double> width_d(5.0, 30.0);
    const int n = bins_d(rng);
    double bound = base_d(rng);
    double min_width = std::numeric_limits<double>::infinity();
    for (int b = 0; b + 1 < n; ++b) {
        const double w = width_d(rng);
        if (b) min_width = std::min(min_width, w);
        bound += w;
        out.bounds.push_back(bound);
        out.lex.noun_bins.push_back({bound, "b" + std::to_string(b)});
    }
    out.lex.noun_bins.push_back(
        {std::numeric_limits<double>::infinity(), "b" + std::to_string(n - 1)});
    if (n > 2 && std::isfinite(min_width)) {
        out.lex.hysteresis =
            std::uniform_real_distribution<double>(0.0, 0.45 * min_width)(rng);
    } else if (n == 2) {
        out.lex.hysteresis = std::uniform_real_distribution<double>(0.0, 4.0)(rng);
    }
    if (rng() % 2 == 0) {
        out.lex.adverb_bins.push_back({1.0, "slowly"});
        out.lex.adverb_bins.push_back({std::numeric_limits<double>::infinity(), "rapidly"});
    }
    if (rng() % 10 < 4) {
        out.lex.adjective_rules.push_back(
            {channel_id, rng() % 2 ? ">" : "<", base_d(rng), "marked"});
    }
    if (rng() % 10 < 6) {
        out.lex.pause_noun = out.lex.noun_bins[rng() % out.lex.noun_bins.size()].label;
        out.lex.comma_max_s = dt * (1 + static_cast<std::int64_t>(rng() % 3));
        out.lex.semicolon_max_s =
            out.lex.comma_max_s + dt * (1 + static_cast<std::int64_t>(rng() % 5));
    }
    out.lex.validate();
    return out;
}

Series random_series(std::mt19937_64& rng, const RandomLexicon& rl, const std::string& id,
                     std::uint32_t dt, std::int64_t t0, std::size_t n) {
    const double lo = rl.bounds.empty() ? -60.0 : rl.bounds.front() - 40.0;
    const double hi = rl.bounds.empty() ? 60.0 : rl.bounds.back() + 40.0;
    std::uniform_real_distribution<double> value_d(lo, hi);
    std::uniform_real_distribution<double> unit_d(0.0, 1.0);
    Series s;
    s.meta.channel_id = id;
    s.meta.phys_min = lo - 1.0;
    s.meta.phys_max = hi + 1.0;
    s.t0 = {t0};
    s.dt_seconds = dt;
    s.values.resize(n);
    double v = value_d(rng);
    for (std::size_t i = 0; i < n; ++i) {
        if (unit_d(rng) < 0.12) {
            s.values[i] = missing_value();
            continue;
        }
        // Mix slow drift with occasional jumps so hysteresis matters.
        if (unit_d(rng) < 0.25) {
            v = value_d(rng);
        } else {
            v += std::uniform_real_distribution<double>(-3.0, 3.0)(rng);
            v = std::clamp(v, lo, hi);
        }
        s.values[i] = v;
    }
    return s;
}

std::size_t bin_of(const symbol::Lexicon& lex, const std::string& label) {
    for (std::size_t b = 0; b < lex.noun_bins.size(); ++b) {
        if (lex.noun_bins[b].label == label) return b;
    }
    throw Fail("unknown noun label " + label);
}

void check_tiling(const Series& s, const symbol::SymbolSequence& seq) {
    const auto ranges = symbol::reconstruct_partition(seq);  // throws if broken
    std::vector<bool> covered(s.size(), false);
    for (const auto& r : ranges) {
        expect((r.start.epoch_seconds - s.t0.epoch_seconds) % s.dt_seconds == 0,
               "noun off the grid");
        for (std::int64_t t = r.start.epoch_seconds; t < r.end.epoch_seconds;
             t += s.dt_seconds) {
            const std::ptrdiff_t i = s.index_of({t});
            expect(i >= 0, "noun covers an off-grid instant");
            expect(!covered[static_cast<std::size_t>(i)], "tiling overlap");
            covered[static_cast<std::size_t>(i)] = true;
        }
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
        expect(covered[i] == !is_missing(s.values[i]),
               covered[i] ? "noun covers a missing sample" : "present sample uncovered");
    }
}

void check_alternation_and_envelope(const Series& s, const symbol::Lexicon& lex,
                                    const symbol::SymbolSequence& seq) {
    std::vector<const symbol::SymbolToken*> nouns;
    std::map<std::int64_t, int> verbs_at;
    for (const auto& t : seq.tokens) {
        if (t.kind == symbol::TokenKind::noun) nouns.push_back(&t);
        if (t.kind == symbol::TokenKind::verb) ++verbs_at[t.t_start.epoch_seconds];
    }
    std::size_t changes = 0;
    for (std::size_t i = 1; i < nouns.size(); ++i) {
        const bool contiguous = nouns[i - 1]->t_end() == nouns[i]->t_start;
        const bool changed = nouns[i - 1]->label != nouns[i]->label;
        if (contiguous) expect(changed, "contiguous nouns share a label");
        if (changed) {
            ++changes;
            const auto it = verbs_at.find(nouns[i]->t_start.epoch_seconds);
            expect(it != verbs_at.end() && it->second == 1,
                   "noun change without exactly one verb");
            // The verb narrates the transition slope only when the
            // previous grid sample exists.
            for (const auto& t : seq.tokens) {
                if (t.kind != symbol::TokenKind::verb ||
                    t.t_start != nouns[i]->t_start) {
                    continue;
                }
                const bool has_adverb = t.qualifiers.count("adverb") != 0;
                if (!lex.adverb_bins.empty() && contiguous) {
                    expect(has_adverb, "contiguous transition lost its adverb");
                }
                if (!contiguous || lex.adverb_bins.empty()) {
                    expect(!has_adverb, "adverb on a gap-crossing or unbinned verb");
                }
            }
        } else {
            expect(!contiguous, "verb bookkeeping: unchanged contiguous nouns");
            expect(verbs_at.count(nouns[i]->t_start.epoch_seconds) == 0,
                   "verb at an unchanged noun boundary");
        }
    }
    std::size_t total_verbs = 0;
    for (const auto& [t, n] : verbs_at) total_verbs += static_cast<std::size_t>(n);
    expect(total_verbs == changes, "verb count diverges from noun label changes");

    const double h = lex.hysteresis;
    for (const auto* noun : nouns) {
        const std::size_t b = bin_of(lex, noun->label);
        for (std::int64_t t = noun->t_start.epoch_seconds; t < noun->t_end().epoch_seconds;
             t += s.dt_seconds) {
            const double v = s.value_at({t});
            expect(!is_missing(v), "noun claims a missing sample");
            if (b + 1 < lex.noun_bins.size()) {
                expect(v - lex.noun_bins[b].upper_bound <= h, "sample above the envelope");
            }
            if (b > 0) {
                expect(lex.noun_bins[b - 1].upper_bound - v <= h, "sample below the envelope");
            }
        }
    }
}

std::size_t count_verbs(const symbol::SymbolSequence& seq) {
    std::size_t n = 0;
    for (const auto& t : seq.tokens) n += t.kind == symbol::TokenKind::verb;
    return n;
}

void check_punctuation(const symbol::Lexicon& lex, const symbol::SymbolSequence& seq) {
    std::size_t pause_nouns = 0, puncts = 0;
    for (const auto& t : seq.tokens) {
        if (t.kind == symbol::TokenKind::noun && t.label == lex.pause_noun) ++pause_nouns;
        if (t.kind == symbol::TokenKind::punct) {
            ++puncts;
            const char* want = t.duration_s <= lex.comma_max_s        ? "comma"
                               : t.duration_s <= lex.semicolon_max_s ? "semicolon"
                                                                     : "full_stop";
            expect(t.label == want, "punctuation class mislabelled");
        }
    }
    if (lex.pause_noun.empty()) {
        expect(puncts == 0, "punctuation without a pause noun");
    } else {
        expect(puncts == pause_nouns, "pause nouns and punctuation tokens diverge");
    }
}

void check_fusion_oracle(const std::vector<Series>& series,
                         const std::vector<symbol::SymbolSequence>& seqs,
                         const symbol::StateLexicon& slex,
                         const symbol::SymbolSequence& fused) {
    const Series& grid = series[0];
    // Per slot: the label of every input's covering noun, or no state at all.
    std::vector<std::vector<std::string>> key_at(grid.size());
    std::vector<bool> has_state(grid.size(), true);
    for (const auto& seq : seqs) {
        std::vector<const std::string*> label_at(grid.size(), nullptr);
        for (const auto& t : seq.tokens) {
            if (t.kind != symbol::TokenKind::noun) continue;
            for (std::int64_t ts = t.t_start.epoch_seconds; ts < t.t_end().epoch_seconds;
                 ts += grid.dt_seconds) {
                label_at[static_cast<std::size_t>(grid.index_of({ts}))] = &t.label;
            }
        }
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (label_at[i] == nullptr) {
                has_state[i] = false;
            } else if (has_state[i]) {
                key_at[i].push_back(*label_at[i]);
            }
        }
    }
    // A stateless slot always breaks the run; equal labels extend it.
    std::vector<std::pair<std::size_t, std::string>> runs;  // start slot, label
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!has_state[i]) continue;
        const auto it = slex.mapping.find(key_at[i]);
        const std::string label = it != slex.mapping.end() ? it->second : slex.default_label;
        const bool extends =
            i > 0 && has_state[i - 1] && !runs.empty() && runs.back().second == label;
        if (!extends) runs.emplace_back(i, label);
    }
    std::vector<symbol::SymbolToken> got_states;
    for (const auto& t : fused.tokens) {
        if (t.kind == symbol::TokenKind::state) got_states.push_back(t);
    }
    expect(got_states.size() == runs.size(),
           fmt("fusion runs: oracle %zu vs fuse_states %zu", runs.size(), got_states.size()));
    for (std::size_t r = 0; r < runs.size(); ++r) {
        const auto [slot, label] = runs[r];
        expect(got_states[r].label == label, "fused state label diverges");
        expect(got_states[r].t_start == grid.timestamp_at(slot), "fused state start diverges");
    }
}

std::string c6_symbolizer_invariants() {
    std::mt19937_64 rng(20260814);
    std::size_t fusions = 0, monotone_checks = 0, two_bin_ladders = 0;
    for (int iter = 0; iter < 1000; ++iter) {
        const std::uint32_t dt = rng() % 2 ? 1 : 60;
        const std::size_t n = 30 + rng() % 170;
        const std::int64_t t0 = kStart + static_cast<std::int64_t>(rng() % 86400) * dt;
        RandomLexicon rl = random_lexicon(rng, "sig", dt);
        const Series s = random_series(rng, rl, "sig", dt, t0, n);
        const symbol::SymbolSequence seq = symbol::symbolize(s, rl.lex);

        check_tiling(s, seq);
        check_alternation_and_envelope(s, rl.lex, seq);
        check_punctuation(rl.lex, seq);

        if (rl.lex.hysteresis > 0.0) {
            // Doubling stays below the smallest bin width by construction.
            symbol::Lexicon relaxed = rl.lex;
            relaxed.hysteresis = 0.0;
            symbol::Lexicon strict = rl.lex;
            strict.hysteresis = rl.lex.hysteresis * 2.0;
            const std::size_t v0 = count_verbs(symbol::symbolize(s, relaxed));
            const std::size_t v1 = count_verbs(seq);
            const std::size_t v2 = count_verbs(symbol::symbolize(s, strict));
            // Suppression against h = 0 is monotone for any lexicon: each
            // commit under hysteresis needs a fresh raw-bin change since
            // the previous commit. Pairwise h1 < h2 monotonicity is a
            // single-boundary theorem only; with three or more bins a
            // lagged state measures later excursions against the nearer
            // boundary of its own bin and may legitimately commit more
            // often (see "a wider hysteresis band can lag ..." in the
            // symbolizer unit suite for a four-sample instance).
            expect(v1 <= v0, "hysteresis increased the transition count over h=0");
            expect(v2 <= v0, "doubled hysteresis increased the transition count over h=0");
            if (rl.lex.noun_bins.size() == 2) {
                expect(v2 <= v1, "single-boundary hysteresis ladder must be monotone");
                ++two_bin_ladders;
            }
            ++monotone_checks;
        }

        if (iter % 3 == 0) {
            RandomLexicon rl2 = random_lexicon(rng, "aux", dt);
            const Series s2 = random_series(rng, rl2, "aux", dt, t0, n);
            const symbol::SymbolSequence seq2 = symbol::symbolize(s2, rl2.lex);
            symbol::StateLexicon slex;
            slex.id = "fused";
            slex.inputs = {"sig", "aux"};
            slex.default_label = "other";
            for (const auto& a : rl.lex.noun_bins) {
                for (const auto& b : rl2.lex.noun_bins) {
                    if (rng() % 3 == 0) {
                        slex.mapping[{a.label, b.label}] = a.label + "+" + b.label;
                    }
                }
            }
            slex.validate();
            const symbol::SymbolSequence fused = symbol::fuse_states({seq, seq2}, slex);
            check_fusion_oracle({s, s2}, {seq, seq2}, slex, fused);
            ++fusions;
        }
    }
    return fmt("1000 randomized pairs: tiling, alternation, envelope, punctuation ok;"
               " %zu ladders bounded by h=0, %zu single-boundary ladders monotone;"
               " %zu fusions match the per-sample oracle",
               monotone_checks, two_bin_ladders, fusions);
}

// ------------------------------------------------ 7. matcher vs oracle

void compare_matchers(const query::Pattern& pattern, const symbol::SymbolSequence& seq,
                      const std::string& label, std::size_t* nonempty) {
    const auto got = query::find_matches(pattern, seq);
    const auto want = oracle::find_matches(pattern, seq);
    if (got != want) {
        std::string dump = label + ": nfa ";
        for (const auto& m : got) {
            dump += "[" + std::to_string(m.first_token_index) + "," +
                    std::to_string(m.last_token_index) + "] ";
        }
        dump += "oracle ";
        for (const auto& m : want) {
            dump += "[" + std::to_string(m.first_token_index) + "," +
                    std::to_string(m.last_token_index) + "] ";
        }
        throw Fail(dump);
    }
    if (!got.empty() && nonempty) ++*nonempty;
}

std::string c7_matcher_equivalence() {
    using symbol::SymbolToken;
    using symbol::TokenKind;

    // Four-symbol alphabet with distinct durations and inter-token gaps so
    // equal exhaustive coverage lands on the gap arithmetic too.
    struct Sym {
        TokenKind kind;
        const char* label;
        std::int64_t dur;
        std::int64_t gap_before;
    };
    const Sym alphabet[4] = {
        {TokenKind::noun, "a", 2, 0},
        {TokenKind::noun, "b", 1, 0},
        {TokenKind::verb, "x", 1, 2},
        {TokenKind::punct, "p", 3, 1},
    };
    const std::vector<query::Pattern> patterns = {
        query::parse_pattern("noun:a"),
        query::parse_pattern("noun:a noun:b"),
        query::parse_pattern("verb:x+"),
        query::parse_pattern("(noun:a|verb:x) ~{0,3} noun:b"),
        query::parse_pattern("noun:a ~{1,2} noun:b? ~{1,3} verb:x"),
        query::parse_pattern("(noun:a? ~{0,4} noun:b?)+"),
        query::parse_pattern("noun:*[dur>1] verb:x?"),
        query::parse_pattern("punct:p{1,2} noun:a"),
    };

    std::size_t exhaustive_cases = 0;
    for (std::size_t len = 0; len <= 8; ++len) {
        std::vector<std::size_t> digits(len, 0);
        while (true) {
            symbol::SymbolSequence seq;
            seq.source = "alpha4";
            seq.dt_seconds = 1;
            std::int64_t t = 0;
            for (std::size_t i = 0; i < len; ++i) {
                const Sym& sym = alphabet[digits[i]];
                t += sym.gap_before;
                seq.tokens.push_back({sym.kind, sym.label, {t}, sym.dur, {}});
                t += sym.dur;
            }
            for (std::size_t p = 0; p < patterns.size(); ++p) {
                compare_matchers(patterns[p], seq, "exhaustive len " + std::to_string(len),
                                 nullptr);
            }
            ++exhaustive_cases;
            std::size_t d = 0;
            while (d < len && ++digits[d] == 4) digits[d++] = 0;
            if (d == len) break;
        }
    }

    std::mt19937_64 rng(20260814);
    testsupport::PatternGen gen(rng);
    std::size_t randomized = 0, nonempty = 0;
    for (int i = 0; i < 1000; ++i) {
        std::string text = gen.generate();
        if (rng() % 2 == 0) text += " " + gen.generate();  // up to 6 terms
        const query::Pattern pattern = query::parse_pattern(text);
        const symbol::SymbolSequence seq = testsupport::random_sequence(rng, 50);
        compare_matchers(pattern, seq, "randomized '" + text + "'", &nonempty);
        ++randomized;
    }
    expect(nonempty > 100, "randomized corpus barely matched; generator drifted");
    return fmt("%zu exhaustive sequences x %zu patterns + %zu randomized (<=50 tokens,"
               " <=6 terms): 0 divergences, %zu nonempty",
               exhaustive_cases, patterns.size(), randomized, nonempty);
}

// --------------------------------------------------- 8. store round-trip

std::string c8_store_roundtrip() {
    const fs::path store_root = g_root / "c8_store";
    store::ChunkStore chunks(store_root);
    std::mt19937_64 rng(88);
    const std::uint32_t dts[5] = {1, 5, 60, 300, 3600};
    std::size_t total_chunks = 0;

    const auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    };

    for (int i = 0; i < 500; ++i) {
        const std::string machine = "m8_" + std::to_string(i);
        const std::uint32_t dt = dts[rng() % 5];
        const std::int64_t t0 =
            kStart + static_cast<std::int64_t>(rng() % (4 * 86400 / dt)) * dt;
        // Cap the wall-clock span so no stream explodes into hundreds of
        // day chunks.
        const std::size_t max_len =
            std::min<std::size_t>(4000, 20 * 86400 / dt);
        const std::size_t len = 1 + rng() % max_len;
        const int n_channels = 1 + static_cast<int>(rng() % 3);

        Stream stream(machine, {t0}, dt, len);
        std::uniform_real_distribution<double> value_d(-1e6, 1e6);
        for (int c = 0; c < n_channels; ++c) {
            Series s;
            s.meta.channel_id = "c" + std::to_string(c);
            s.meta.phys_min = -2e6;
            s.meta.phys_max = 2e6;
            s.t0 = {t0};
            s.dt_seconds = dt;
            s.values.resize(len);
            for (std::size_t j = 0; j < len; ++j) {
                if (rng() % 100 < 18) {
                    // gap runs, occasionally swallowing whole days
                    const std::size_t run = 1 + rng() % 40;
                    for (std::size_t r = 0; r < run && j < len; ++r, ++j) {
                        s.values[j] = missing_value();
                    }
                    --j;
                } else {
                    s.values[j] = value_d(rng);
                }
            }
            // An all-missing channel would never reach disk; keep one
            // present sample so the read side has a directory to find.
            s.values[0] = value_d(rng);
            stream.add_channel(std::move(s));
        }

        const std::size_t created = chunks.write_stream(stream);
        expect(created > 0, "nothing was written");
        total_chunks += created;

        std::vector<std::string> ids;
        for (int c = 0; c < n_channels; ++c) ids.push_back("c" + std::to_string(c));
        const Stream back = chunks.read_range(machine, ids, stream.extent(), dt);
        expect(back.length() == stream.length(), "round-trip length changed");
        for (const auto& id : ids) {
            const auto& a = stream.channel(id).values;
            const auto& b = back.channel(id).values;
            for (std::size_t j = 0; j < a.size(); ++j) {
                if (is_missing(a[j])) {
                    expect(is_missing(b[j]), "present sample where a gap was written");
                } else {
                    expect(std::memcmp(&a[j], &b[j], sizeof(double)) == 0,
                           "sample not bit-exact after round-trip");
                }
            }
        }

        // Rewrites must be silent no-ops leaving the files byte-identical.
        std::map<std::string, std::string> before;
        for (const auto& entry : fs::recursive_directory_iterator(store_root / machine)) {
            if (entry.is_regular_file()) {
                before[entry.path().string()] = slurp(entry.path());
            }
        }
        expect(chunks.write_stream(stream) == 0, "rewrite created new chunk files");
        for (const auto& [path, bytes] : before) {
            expect(slurp(path) == bytes, "rewrite changed chunk bytes: " + path);
        }
        fs::remove_all(store_root / machine);
    }

    fs::remove_all(store_root);
    return fmt("500 gap-bearing streams bit-exact over %zu chunk files; rewrites byte-stable",
               total_chunks);
}

// ------------------------------------------------- 9. derived channels

std::string c9_derived_force() {
    std::mt19937_64 rng(99);
    const std::size_t n = 86400;
    Stream stream("m9", {kStart}, 1, n);
    Series press;
    press.meta.channel_id = "pressure";
    press.meta.phys_min = 0;
    press.meta.phys_max = 400;
    press.t0 = {kStart};
    press.dt_seconds = 1;
    press.values.assign(n, 200.0);
    std::size_t pressure_missing = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (rng() % 50 == 0) {
            const std::size_t run = 1 + rng() % 600;
            for (std::size_t r = 0; r < run && i < n; ++r, ++i) {
                press.values[i] = missing_value();
                ++pressure_missing;
            }
        }
    }
    stream.add_channel(press);

    derived::DerivedSpec spec;
    spec.output.channel_id = "force";
    spec.output.unit = "N";
    spec.output.phys_min = 0;
    spec.output.phys_max = 2e6;
    spec.output.kind = ChannelKind::derived;
    spec.expression = "pressure * meta.bar_to_pa * meta.piston_area_m2";
    spec.constants = {{"bar_to_pa", 100000.0}, {"piston_area_m2", 0.05}};
    spec.tree = derived::parse_expression(spec.expression);

    const Series force = derived::evaluate(spec, stream);
    std::size_t present = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (is_missing(press.values[i])) {
            expect(is_missing(force.values[i]), "force present where pressure is missing");
        } else {
            expect(force.values[i] == 1.0e6, "force diverges from 1.0e6 N");
            ++present;
        }
    }
    expect(present + pressure_missing == n, "count law bookkeeping");

    // Missing-propagation count law on randomized two-channel gap patterns.
    std::mt19937_64 law_rng(77);
    for (int round = 0; round < 50; ++round) {
        const std::size_t m = 200 + law_rng() % 800;
        Stream st("law", {kStart}, 60, m);
        std::vector<std::vector<double>> cols(2);
        for (int c = 0; c < 2; ++c) {
            Series s;
            s.meta.channel_id = c == 0 ? "p" : "q";
            s.meta.phys_min = -100;
            s.meta.phys_max = 100;
            s.t0 = {kStart};
            s.dt_seconds = 60;
            s.values.resize(m);
            for (std::size_t i = 0; i < m; ++i) {
                if (law_rng() % 5 == 0) {
                    s.values[i] = missing_value();
                } else if (c == 1 && law_rng() % 7 == 0) {
                    s.values[i] = 0.0;  // divisor zeros must propagate too
                } else {
                    s.values[i] =
                        std::uniform_real_distribution<double>(-50.0, 50.0)(law_rng);
                }
            }
            cols[c] = s.values;
            st.add_channel(std::move(s));
        }
        derived::DerivedSpec ratio;
        ratio.output.channel_id = "r";
        ratio.output.phys_min = -1e9;
        ratio.output.phys_max = 1e9;
        ratio.output.kind = ChannelKind::derived;
        ratio.expression = "p / q";
        ratio.tree = derived::parse_expression(ratio.expression);
        const Series r = derived::evaluate(ratio, st);
        std::size_t want_missing = 0;
        for (std::size_t i = 0; i < m; ++i) {
            if (is_missing(cols[0][i]) || is_missing(cols[1][i]) || cols[1][i] == 0.0) {
                ++want_missing;
            }
        }
        std::size_t got_missing = 0;
        for (double v : r.values) got_missing += is_missing(v);
        expect(got_missing == want_missing,
               fmt("round %d: %zu missing, law demands %zu", round, got_missing,
                   want_missing));
    }

    return fmt("200 bar x 0.05 m^2 -> 1.0e6 N exact at %zu samples; count law holds on 50"
               " randomized gap patterns",
               present);
}

}  // namespace

int main() {
    g_root = fs::temp_directory_path() / ("astsa_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(g_root);
    fs::create_directories(g_root);

    std::printf("acceptance gate: %s\n", ASTSA_CLI_PATH);
    criterion(1, "contiguous-stream assembly (3 days @1s)", c1_assembly);
    criterion(2, "incident analysis at scale (61 days, 10 channels, 63 events)", c2_incidents);
    criterion(3, "year-scale polar aggregation (31,536,000 samples, streaming)",
              c3_year_histogram);
    criterion(4, "daily-invisible / annually-visible quadrant share", c4_quadrant_share);
    criterion(5, "commissioning sporadic-fault scan (30 days)", c5_sporadic_faults);
    criterion(6, "symbolizer invariant suite (1000 randomized pairs)",
              c6_symbolizer_invariants);
    criterion(7, "query matcher vs backtracking oracle", c7_matcher_equivalence);
    criterion(8, "store round-trip (500 gap-bearing streams)", c8_store_roundtrip);
    criterion(9, "derived-channel force law", c9_derived_force);

    fs::remove_all(g_root);
    if (g_failures == 0) {
        std::printf("all 9 criteria passed\n");
    } else {
        std::printf("%d criteria FAILED\n", g_failures);
    }
    return g_failures;
}
