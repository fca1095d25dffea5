#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "astsa/ingest.hpp"

using namespace astsa;
using namespace astsa::ingest;

namespace {

const char* kMeta = R"({
  "packet_id": "m1-2025-03-01",
  "machine_id": "m1",
  "created_at": "2025-03-02T00:00:00Z",
  "channels": [
    {"channel_id": "press", "unit": "bar", "phys_min": 0, "phys_max": 100},
    {"channel_id": "flow", "unit": "l/min", "phys_min": 0, "phys_max": 50}
  ]
})";

DataPacket packet_from(const char* csv) { return parse_packet(kMeta, csv); }

}  // namespace

TEST_CASE("parse_packet reads sidecar and wide csv") {
    const DataPacket p = packet_from(
        "timestamp,press,flow\n"
        "2025-03-01T00:00:00Z,10.5,1\n"
        "2025-03-01T00:00:01Z,,2\n"
        "2025-03-01T00:00:02Z,12.25,\n");
    CHECK(p.packet_id == "m1-2025-03-01");
    CHECK(p.machine_id == "m1");
    CHECK(p.created_at == parse_iso8601("2025-03-02T00:00:00Z"));
    CHECK(p.channels.size() == 2);
    CHECK(p.row_count() == 3);
    CHECK(p.columns.at("press")[0] == 10.5);
    CHECK(is_missing(p.columns.at("press")[1]));
    CHECK(p.columns.at("press")[2] == 12.25);
    CHECK(p.columns.at("flow")[1] == 2.0);
    CHECK(is_missing(p.columns.at("flow")[2]));
    CHECK(p.find_channel("press")->unit == "bar");
    CHECK(p.find_channel("nope") == nullptr);
}

TEST_CASE("parse_packet tolerates CRLF and missing trailing newline") {
    const DataPacket p = packet_from(
        "timestamp,press,flow\r\n"
        "2025-03-01T00:00:00Z,1,2\r\n"
        "2025-03-01T00:00:01Z,3,4");
    CHECK(p.row_count() == 2);
    CHECK(p.columns.at("flow")[1] == 4.0);
}

TEST_CASE("declared channel missing from the table becomes all-missing") {
    const DataPacket p = packet_from(
        "timestamp,press\n"
        "2025-03-01T00:00:00Z,1\n");
    REQUIRE(p.columns.count("flow") == 1);
    CHECK(p.columns.at("flow").size() == 1);
    CHECK(is_missing(p.columns.at("flow")[0]));
}

TEST_CASE("parse_packet rejects malformed documents") {
    CHECK_THROWS_AS(parse_packet("{", "timestamp\n"), FormatError);
    CHECK_THROWS_AS(parse_packet("[]", "timestamp\n"), FormatError);
    CHECK_THROWS_AS(parse_packet(R"({"machine_id":"m"})", "timestamp\n"), SchemaError);
    CHECK_THROWS_AS(packet_from(""), FormatError);
    CHECK_THROWS_AS(packet_from("time,press,flow\n"), FormatError);
    CHECK_THROWS_AS(packet_from("timestamp,bogus\n"), SchemaError);
    CHECK_THROWS_AS(packet_from("timestamp,press,press\n"), SchemaError);
    CHECK_THROWS_AS(packet_from("timestamp,press,flow\n2025-03-01T00:00:00Z,1\n"),
                    FormatError);
    CHECK_THROWS_AS(packet_from("timestamp,press,flow\n2025-03-01T00:00:00Z,1,2,3\n"),
                    FormatError);
    CHECK_THROWS_AS(packet_from("timestamp,press,flow\n2025-03-01T00:00:00Z,abc,2\n"),
                    FormatError);
}

TEST_CASE("quality_check flags each rule exactly once per instance") {
    const DataPacket p = packet_from(
        "timestamp,press,flow\n"
        "2025-03-01T00:00:00Z,10,1\n"
        "2025-03-01T00:00:01Z,150,2\n"   // press out of range
        "2025-03-01T00:00:01Z,11,3\n"    // duplicate timestamp
        "2025-03-01T00:00:00Z,12,4\n"    // non-monotonic + duplicate
        "2025-03-01T00:00:03Z,inf,5\n"); // non-finite
    const QcReport r = quality_check(p);
    CHECK(r.count(QcRule::OutOfPhysicalRange) == 1);
    CHECK(r.count(QcRule::DuplicateTimestamp) == 2);
    CHECK(r.count(QcRule::NonMonotonicTime) == 1);
    CHECK(r.count(QcRule::NonFiniteValue) == 1);
    CHECK_FALSE(r.accepted);
}

TEST_CASE("monotonic in-range packet is accepted") {
    const DataPacket p = packet_from(
        "timestamp,press,flow\n"
        "2025-03-01T00:00:00Z,10,1\n"
        "2025-03-01T00:00:05Z,11,2\n");  // gaps in time are fine
    const QcReport r = quality_check(p);
    CHECK(r.accepted);
    CHECK(r.violations.empty());
}

TEST_CASE("sanitize drops later duplicates and blanks bad cells") {
    const DataPacket p = packet_from(
        "timestamp,press,flow\n"
        "2025-03-01T00:00:00Z,10,1\n"
        "2025-03-01T00:00:01Z,150,2\n"
        "2025-03-01T00:00:01Z,11,3\n");
    const DataPacket clean = sanitize(p, quality_check(p));
    REQUIRE(clean.row_count() == 2);
    CHECK(clean.timestamps[1] == parse_iso8601("2025-03-01T00:00:01Z"));
    CHECK(is_missing(clean.columns.at("press")[1]));  // range violation blanked
    CHECK(clean.columns.at("flow")[1] == 2.0);        // first duplicate kept
}

TEST_CASE("merge assembles a contiguous gap-aware stream") {
    const DataPacket a = packet_from(
        "timestamp,press\n"
        "2025-03-01T00:00:00Z,1\n"
        "2025-03-01T00:00:02Z,2\n");
    const DataPacket b = packet_from(
        "timestamp,press\n"
        "2025-03-01T00:00:05Z,3\n");
    auto [stream, conflicts] = merge_packets({a, b}, "m1", 1);
    CHECK(conflicts.empty());
    CHECK(stream.t0() == parse_iso8601("2025-03-01T00:00:00Z"));
    CHECK(stream.length() == 6);
    const auto& v = stream.channel("press").values;
    CHECK(v[0] == 1.0);
    CHECK(is_missing(v[1]));
    CHECK(v[2] == 2.0);
    CHECK(is_missing(v[3]));
    CHECK(is_missing(v[4]));
    CHECK(v[5] == 3.0);
    // flow was declared but never reported
    CHECK(coverage_stats(stream.channel("flow")).present == 0);
}

TEST_CASE("merge keeps equal overlaps silent and resolves disagreements") {
    const char* meta_late = R"({
      "packet_id": "m1-b",
      "machine_id": "m1",
      "created_at": "2025-03-03T00:00:00Z",
      "channels": [{"channel_id": "press", "phys_min": 0, "phys_max": 100}]
    })";
    const DataPacket a = packet_from(
        "timestamp,press\n"
        "2025-03-01T00:00:00Z,1\n"
        "2025-03-01T00:00:01Z,7\n");
    const DataPacket b = parse_packet(meta_late,
                                      "timestamp,press\n"
                                      "2025-03-01T00:00:01Z,7\n"
                                      "2025-03-01T00:00:02Z,9\n");
    const DataPacket c = parse_packet(meta_late,
                                      "timestamp,press\n"
                                      "2025-03-01T00:00:00Z,5\n");

    auto [s1, conflicts1] = merge_packets({a, b}, "m1", 1);
    CHECK(conflicts1.empty());  // overlap agrees
    CHECK(s1.channel("press").values[1] == 7.0);

    auto [s2, conflicts2] = merge_packets({a, b, c}, "m1", 1);
    REQUIRE(conflicts2.size() == 1);
    CHECK(conflicts2[0].channel_id == "press");
    CHECK(conflicts2[0].existing == 1.0);
    CHECK(conflicts2[0].incoming == 5.0);
    CHECK(s2.channel("press").values[0] == 5.0);  // later created_at wins

    // Input permutation changes nothing.
    auto [s3, conflicts3] = merge_packets({c, b, a}, "m1", 1);
    CHECK(s3 == s2);
    CHECK(conflicts3.size() == 1);
}

TEST_CASE("merge validates machine and grid") {
    const DataPacket a = packet_from(
        "timestamp,press\n"
        "2025-03-01T00:00:00Z,1\n"
        "2025-03-01T00:00:07Z,2\n");
    CHECK_THROWS_AS(merge_packets({a}, "other", 1), SchemaError);
    CHECK_THROWS_AS(merge_packets({a}, "m1", 10), IntervalError);  // 7 s row off 10 s grid
    auto [stream, conflicts] = merge_packets({}, "m1", 1);
    CHECK(stream.length() == 0);
}
