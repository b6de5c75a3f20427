#pragma once

#include <array>
#include <cstddef>
#include <istream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bidscreen/common.hpp"

namespace bidscreen::ingest {

/// Column order of the bid CSV schema, shared by the parser, the cleaned output and the
/// synthetic generator.
inline const std::vector<std::string> kBidColumns = {
    "auction_id", "procurer_id", "firm_id",  "region_id", "reserve_price",
    "price",      "start_date",  "end_date", "bid_date"};

/// One raw bid row. Value fields are optional because an empty cell is a legal parse
/// result that cleaning rejects later; identifiers use the empty string for "missing".
struct BidRecord {
    std::string auction_id;
    std::string procurer_id;
    std::string firm_id;
    std::string region_id;
    std::optional<double> reserve_price;
    std::optional<double> price;
    std::optional<Timestamp> start_date;
    std::optional<Timestamp> end_date;
    std::optional<Timestamp> bid_date;

    bool complete() const;
    friend bool operator==(const BidRecord&, const BidRecord&) = default;
};

struct ParseDiagnostic {
    std::size_t row = 0;  // 1-based line number in the source, header is row 1
    std::string cause;
};

struct ParseResult {
    std::vector<BidRecord> records;
    std::vector<ParseDiagnostic> diagnostics;
};

/// Parses a bid CSV stream. The header must match kBidColumns exactly (otherwise Error).
/// Malformed rows become diagnostics; parsing continues.
ParseResult parse_bids(std::istream& in);
ParseResult parse_bids_file(const std::string& path);

void write_bids(std::ostream& out, const std::vector<BidRecord>& records);

enum class Rule : std::size_t {
    MissingField = 0,
    DateOrder,
    PriceBounds,
    ReserveCap,
    Baikonur,
    LowReserve,
    SingleAppearanceFirm,
};
inline constexpr std::size_t kRuleCount = 7;
const char* rule_name(Rule rule);

struct CleaningConfig {
    double reserve_cap = 500000.0;
    double low_reserve = 3440.0;
    std::set<std::string> baikonur_regions = {"99"};
};

struct CleaningReport {
    std::array<std::size_t, kRuleCount> rejected{};
    std::size_t retained = 0;

    std::size_t count(Rule rule) const { return rejected[static_cast<std::size_t>(rule)]; }
    std::size_t total_rejected() const;
    std::size_t input_count() const { return retained + total_rejected(); }
    friend bool operator==(const CleaningReport&, const CleaningReport&) = default;
};

struct CleanResult {
    std::vector<BidRecord> records;
    CleaningReport report;
};

/// Applies the seven rejection rules in order; each record is tallied by the first rule it
/// violates. Rule 7 is a single pass over the survivors of rules 1-6 and removes bids of
/// firms that bid in only one auction. Survivor order matches input order.
CleanResult clean(const std::vector<BidRecord>& records, const CleaningConfig& config = {});

/// Writes the report as `rule,count` rows including a trailing `retained` row.
void write_report(std::ostream& out, const CleaningReport& report);

struct AuctionBid {
    std::string firm_id;
    double price = 0.0;
    Timestamp bid_date = 0;
};

struct Auction {
    std::string auction_id;
    std::string procurer_id;
    std::string region_id;
    double reserve_price = 0.0;
    Timestamp start_date = 0;
    Timestamp end_date = 0;
    std::vector<AuctionBid> bids;
    std::string winner;
    bool is_single = false;

    const AuctionBid& winning_bid() const;
};

struct GroupResult {
    std::vector<Auction> auctions;  // sorted by auction_id
    std::vector<std::string> diagnostics;
    std::size_t dropped = 0;
};

/// Groups cleaned bids by auction. Winner is the lowest price, ties broken by earliest
/// bid_date and then lexicographically smallest firm_id. Auctions whose bids disagree on
/// procurer, region, reserve or dates are dropped with a diagnostic.
GroupResult group_auctions(const std::vector<BidRecord>& bids);

}  // namespace bidscreen::ingest
