#include <doctest.h>

#include <fstream>
#include <sstream>

#include "bidscreen/csv.hpp"
#include "bidscreen/ingest.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace bidscreen;
using namespace bidscreen::ingest;
using fixtures::bid;
using oracles::planted_fixture;

namespace {

const char* kHeader =
    "auction_id,procurer_id,firm_id,region_id,reserve_price,price,start_date,end_date,bid_date\n";

std::string good_row(int i) {
    return "A" + std::to_string(i) + ",P1,F" + std::to_string(i % 7) +
           ",12,10000,9000.5,2015-03-01T10:00:00,2015-03-09T10:00:00,2015-03-05T12:30:00\n";
}

}  // namespace

TEST_CASE("timestamps round-trip and reject malformed text") {
    Timestamp t = 0;
    REQUIRE(parse_timestamp("2016-02-29T23:59:59", t));
    CHECK(format_timestamp(t) == "2016-02-29T23:59:59");
    CHECK(t == make_timestamp(2016, 2, 29, 23, 59, 59));
    CHECK(year_of(t) == 2016);
    CHECK_FALSE(parse_timestamp("2015-02-29T00:00:00", t));
    CHECK_FALSE(parse_timestamp("2015-01-01 00:00:00", t));
    CHECK_FALSE(parse_timestamp("2015-01-01T24:00:00", t));
    CHECK_FALSE(parse_timestamp("2015-1-01T00:00:00", t));
    CHECK(day_index(-1) == -1);
    CHECK(day_index(kSecondsPerDay) == 1);
}

TEST_CASE("parse fixture of 1000 rows with 10 malformed ones") {
    std::string text = kHeader;
    std::vector<std::size_t> bad_rows;
    const std::vector<std::string> broken = {
        "A1,P1,F1,12,10000,9000\n",                                                         // arity
        "A2,P1,F1,12,10000,abc,2015-03-01T10:00:00,2015-03-09T10:00:00,2015-03-05T12:30:00\n",  // price
        "A3,P1,F1,12,10000,9000,2015-03-01,2015-03-09T10:00:00,2015-03-05T12:30:00\n",  // start
        "A4,P1,F1,12,1e4x,9000,2015-03-01T10:00:00,2015-03-09T10:00:00,2015-03-05T12:30:00\n",
        "A5,P1,F1,12,10000,9000,2015-03-01T10:00:00,2015-13-09T10:00:00,2015-03-05T12:30:00\n",
        "\"A6,P1,F1,12,10000,9000,2015-03-01T10:00:00,2015-03-09T10:00:00,2015-03-05T12:30:00\n",
        "A7,P1,F1,12,10000,9000,2015-03-01T10:00:00,2015-03-09T10:00:00,2015-03-05T12:30:00,x\n",
        "A8,P1,F1,12,10000,9000,2015-03-01T10:00:00,2015-03-09T10:00:00,yesterday\n",
        "A9,P1,F1,12,10000,--1,2015-03-01T10:00:00,2015-03-09T10:00:00,2015-03-05T12:30:00\n",
        "A10,P1,F1,12,10000,9000,2015-03-01T10:00:00,2015-03-09T10:00:00\n",
    };
    std::size_t next_bad = 0;
    for (std::size_t row = 2; row <= 1001; ++row) {
        if (row % 100 == 50 && next_bad < broken.size()) {
            text += broken[next_bad++];
            bad_rows.push_back(row);
        } else {
            text += good_row(int(row));
        }
    }
    REQUIRE(bad_rows.size() == 10);
    std::istringstream in(text);
    const auto res = parse_bids(in);
    CHECK(res.records.size() == 990);
    REQUIRE(res.diagnostics.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) CHECK(res.diagnostics[i].row == bad_rows[i]);
    CHECK(res.diagnostics[0].cause.find("expected 9 columns") != std::string::npos);
    CHECK(res.diagnostics[1].cause.find("price") != std::string::npos);
    CHECK(res.diagnostics[2].cause.find("start_date") != std::string::npos);
}

TEST_CASE("empty cells parse as missing values and are rejected by rule 1") {
    std::istringstream in(std::string(kHeader) +
                          "A1,P1,,12,10000,,2015-03-01T10:00:00,2015-03-09T10:00:00,\n");
    const auto res = parse_bids(in);
    REQUIRE(res.records.size() == 1);
    CHECK_FALSE(res.records[0].complete());
    CHECK(clean(res.records).report.count(Rule::MissingField) == 1);
}

TEST_CASE("header mismatch is an error, BOM and CRLF are tolerated") {
    std::istringstream wrong("auction,procurer\n");
    CHECK_THROWS_AS(parse_bids(wrong), Error);
    std::string crlf = "\xEF\xBB\xBF" + std::string(kHeader);
    crlf.insert(crlf.size() - 1, "\r");
    crlf += good_row(1);
    std::istringstream in(crlf);
    CHECK(parse_bids(in).records.size() == 1);
}

TEST_CASE("write_bids then parse_bids is lossless") {
    std::vector<BidRecord> recs = {
        bid("A,1", "P\"1", "F1", "77", 123456.78, 100000.01, "2015-03-01T10:00:00",
            "2015-03-09T10:00:00", "2015-03-05T12:30:00"),
        bid("A2", "P1", "F2", "01", 3440, 0.1 + 0.2, "2015-03-01T10:00:00", "2015-03-09T10:00:00",
            "2015-03-09T10:00:00")};
    recs[1].price.reset();
    std::ostringstream out;
    write_bids(out, recs);
    std::istringstream in(out.str());
    const auto back = parse_bids(in);
    REQUIRE(back.diagnostics.empty());
    CHECK(back.records == recs);
}

TEST_CASE("planted cleaning fixture: exact rule counts and idempotence") {
    const auto p = planted_fixture();
    REQUIRE(p.rows.size() == 1000);
    REQUIRE(p.counts[std::size_t(Rule::SingleAppearanceFirm)] == 18);
    const auto res = clean(p.rows);
    for (std::size_t r = 0; r < kRuleCount; ++r) {
        CAPTURE(rule_name(Rule(r)));
        CHECK(res.report.rejected[r] == p.counts[r]);
    }
    CHECK(res.report.retained == p.retained);
    CHECK(res.report.input_count() == 1000);

    const auto again = clean(res.records);
    CHECK(again.report.total_rejected() == 0);
    CHECK(again.records == res.records);
}

TEST_CASE("cleaning report lists every rule then the retained count") {
    CleaningReport rep;
    rep.rejected[2] = 4;
    rep.retained = 9;
    std::ostringstream out;
    write_report(out, rep);
    CHECK(out.str() ==
          "rule,count\nmissing-field,0\ndate-order,0\nprice-bounds,4\nreserve-cap,0\nbaikonur,0\n"
          "low-reserve,0\nsingle-appearance-firm,0\nretained,9\n");
}

TEST_CASE("boundary values survive cleaning") {
    const std::string s = "2016-05-01T09:00:00", e = "2016-05-10T09:00:00";
    std::vector<BidRecord> rows = {
        bid("A1", "P", "F1", "12", 500000, 500000, s, e, s),
        bid("A2", "P", "F1", "12", 3440, 0, s, e, e),
        bid("A1", "P", "F2", "12", 500000, 1, s, e, e),
        bid("A2", "P", "F2", "12", 3440, 3440, s, e, s),
    };
    CHECK(clean(rows).report.retained == 4);
}

TEST_CASE("winner tie rule: equal prices go to the earlier bid") {
    const std::string s = "2016-05-01T09:00:00", e = "2016-05-10T09:00:00";
    std::vector<BidRecord> rows = {
        bid("A1", "P", "F1", "12", 200, 100, s, e, "2016-05-02T09:00:00"),
        bid("A1", "P", "F2", "12", 200, 90, s, e, "2016-05-04T09:00:00"),  // t2
        bid("A1", "P", "F3", "12", 200, 90, s, e, "2016-05-03T09:00:00"),  // t1, larger firm id
    };
    const auto g = group_auctions(rows);
    REQUIRE(g.auctions.size() == 1);
    CHECK(g.auctions[0].winner == "F3");
    CHECK_FALSE(g.auctions[0].is_single);

    rows[2].bid_date = rows[1].bid_date;  // full tie: smallest firm id
    CHECK(group_auctions(rows).auctions[0].winner == "F2");
}

TEST_CASE("grouping drops auctions with inconsistent metadata") {
    const std::string s = "2016-05-01T09:00:00", e = "2016-05-10T09:00:00";
    std::vector<BidRecord> rows = {
        bid("B", "P", "F1", "12", 200, 100, s, e, s),
        bid("B", "P", "F2", "12", 201, 100, s, e, s),
        bid("A", "P", "F1", "12", 200, 100, s, e, s),
        bid("A", "P", "F1", "12", 200, 120, s, e, e),
    };
    const auto g = group_auctions(rows);
    CHECK(g.dropped == 1);
    REQUIRE(g.diagnostics.size() == 1);
    REQUIRE(g.auctions.size() == 1);
    CHECK(g.auctions[0].auction_id == "A");
    CHECK(g.auctions[0].is_single);  // one firm, two bids
    CHECK(g.auctions[0].winning_bid().price == 100);
}

TEST_CASE("csv helpers") {
    std::vector<std::string> f;
    REQUIRE(csv::split_record("a,\"b,c\",\"d\"\"e\",", f));
    CHECK(f == std::vector<std::string>{"a", "b,c", "d\"e", ""});
    CHECK_FALSE(csv::split_record("\"open", f));
    CHECK(csv::escape("x,y") == "\"x,y\"");
    CHECK(csv::format_double(0.1) == "0.1");
    CHECK(csv::format_double(-0.0) == "0");
    double d = 0;
    CHECK(csv::parse_double(csv::format_double(1.0 / 3.0), d));
    CHECK(d == 1.0 / 3.0);
    CHECK_FALSE(csv::parse_double("1.5x", d));
    CHECK_FALSE(csv::parse_double("", d));
}

TEST_CASE("write_atomic leaves no partial file when the writer throws") {
    fixtures::TempDir dir;
    const auto target = dir.path / "out.csv";
    csv::write_atomic(target, [](std::ostream& o) { o << "old\n"; });
    CHECK_THROWS(csv::write_atomic(target, [](std::ostream& o) {
        o << "partial";
        throw Error("boom");
    }));
    std::ifstream in(target);
    std::string line;
    std::getline(in, line);
    CHECK(line == "old");
    CHECK_FALSE(std::filesystem::exists(dir.path / "out.csv.tmp"));
}
