#include "bidscreen/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "bidscreen/csv.hpp"

namespace bidscreen::ingest {

bool BidRecord::complete() const {
    return !auction_id.empty() && !procurer_id.empty() && !firm_id.empty() &&
           !region_id.empty() && reserve_price && price && start_date && end_date && bid_date;
}

namespace {

bool parse_money(const std::string& field, const char* name, std::optional<double>& out,
                 std::string& cause) {
    if (field.empty()) return true;
    double v = 0.0;
    if (!csv::parse_double(field, v)) {
        cause = std::string(name) + " not numeric";
        return false;
    }
    out = v;
    return true;
}

bool parse_time(const std::string& field, const char* name, std::optional<Timestamp>& out,
                std::string& cause) {
    if (field.empty()) return true;
    Timestamp ts = 0;
    if (!parse_timestamp(field, ts)) {
        cause = std::string(name) + " not an ISO 8601 timestamp";
        return false;
    }
    out = ts;
    return true;
}

std::string money(const std::optional<double>& v) { return v ? csv::format_double(*v) : ""; }
std::string when(const std::optional<Timestamp>& v) { return v ? format_timestamp(*v) : ""; }

}  // namespace

ParseResult parse_bids(std::istream& in) {
    ParseResult result;
    std::string line;
    std::vector<std::string> fields;
    if (!csv::read_line(in, line)) throw Error("bid source is empty (missing header)");
    if (!line.empty() && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!csv::split_record(line, fields) || fields != kBidColumns)
        throw Error("bid source header must be: " + csv::join(kBidColumns));

    std::size_t row = 1;
    while (csv::read_line(in, line)) {
        ++row;
        if (line.empty()) continue;
        if (!csv::split_record(line, fields)) {
            result.diagnostics.push_back({row, "unterminated quoted field"});
            continue;
        }
        if (fields.size() != kBidColumns.size()) {
            result.diagnostics.push_back({row, "expected 9 columns, found " +
                                                   std::to_string(fields.size())});
            continue;
        }
        BidRecord rec;
        rec.auction_id = fields[0];
        rec.procurer_id = fields[1];
        rec.firm_id = fields[2];
        rec.region_id = fields[3];
        std::string cause;
        const bool ok = parse_money(fields[4], "reserve_price", rec.reserve_price, cause) &&
                        parse_money(fields[5], "price", rec.price, cause) &&
                        parse_time(fields[6], "start_date", rec.start_date, cause) &&
                        parse_time(fields[7], "end_date", rec.end_date, cause) &&
                        parse_time(fields[8], "bid_date", rec.bid_date, cause);
        if (!ok) {
            result.diagnostics.push_back({row, cause});
            continue;
        }
        result.records.push_back(std::move(rec));
    }
    if (in.bad()) throw Error("read error in bid source");
    return result;
}

ParseResult parse_bids_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open bid source " + path);
    return parse_bids(in);
}

void write_bids(std::ostream& out, const std::vector<BidRecord>& records) {
    out << csv::join(kBidColumns) << '\n';
    for (const auto& r : records) {
        out << csv::join({r.auction_id, r.procurer_id, r.firm_id, r.region_id,
                          money(r.reserve_price), money(r.price), when(r.start_date),
                          when(r.end_date), when(r.bid_date)})
            << '\n';
    }
}

const char* rule_name(Rule rule) {
    switch (rule) {
        case Rule::MissingField: return "missing-field";
        case Rule::DateOrder: return "date-order";
        case Rule::PriceBounds: return "price-bounds";
        case Rule::ReserveCap: return "reserve-cap";
        case Rule::Baikonur: return "baikonur";
        case Rule::LowReserve: return "low-reserve";
        case Rule::SingleAppearanceFirm: return "single-appearance-firm";
    }
    return "unknown";
}

std::size_t CleaningReport::total_rejected() const {
    std::size_t total = 0;
    for (auto c : rejected) total += c;
    return total;
}

namespace {

std::optional<Rule> first_record_rule(const BidRecord& r, const CleaningConfig& config) {
    if (!r.complete()) return Rule::MissingField;
    // bid_date outside [start, end] is a date-order error as well.
    if (*r.start_date > *r.end_date || *r.bid_date < *r.start_date || *r.bid_date > *r.end_date)
        return Rule::DateOrder;
    if (*r.price < 0.0 || *r.price > *r.reserve_price) return Rule::PriceBounds;
    if (*r.reserve_price > config.reserve_cap) return Rule::ReserveCap;
    if (config.baikonur_regions.count(r.region_id)) return Rule::Baikonur;
    if (*r.reserve_price < config.low_reserve) return Rule::LowReserve;
    return std::nullopt;
}

}  // namespace

CleanResult clean(const std::vector<BidRecord>& records, const CleaningConfig& config) {
    CleanResult result;
    std::vector<const BidRecord*> survivors;
    survivors.reserve(records.size());
    for (const auto& r : records) {
        if (auto rule = first_record_rule(r, config)) {
            ++result.report.rejected[static_cast<std::size_t>(*rule)];
        } else {
            survivors.push_back(&r);
        }
    }

    // Rule 7: one pass, counted in distinct auctions per firm.
    std::unordered_map<std::string, std::unordered_set<std::string>> auctions_of_firm;
    for (const auto* r : survivors) auctions_of_firm[r->firm_id].insert(r->auction_id);
    for (const auto* r : survivors) {
        if (auctions_of_firm[r->firm_id].size() < 2) {
            ++result.report.rejected[static_cast<std::size_t>(Rule::SingleAppearanceFirm)];
        } else {
            result.records.push_back(*r);
        }
    }
    result.report.retained = result.records.size();
    return result;
}

void write_report(std::ostream& out, const CleaningReport& report) {
    out << "rule,count\n";
    for (std::size_t i = 0; i < kRuleCount; ++i)
        out << rule_name(static_cast<Rule>(i)) << ',' << report.rejected[i] << '\n';
    out << "retained," << report.retained << '\n';
}

namespace {

bool bid_order(const AuctionBid& l, const AuctionBid& r) {
    return std::tie(l.price, l.bid_date, l.firm_id) < std::tie(r.price, r.bid_date, r.firm_id);
}

}  // namespace

const AuctionBid& Auction::winning_bid() const {
    if (bids.empty()) throw Error("auction " + auction_id + " has no bids");
    return *std::min_element(bids.begin(), bids.end(), bid_order);
}

GroupResult group_auctions(const std::vector<BidRecord>& bids) {
    std::map<std::string, std::vector<const BidRecord*>> by_auction;
    for (const auto& b : bids) {
        if (!b.complete()) throw Error("group_auctions requires cleaned bids");
        by_auction[b.auction_id].push_back(&b);
    }

    GroupResult result;
    result.auctions.reserve(by_auction.size());
    for (auto& [id, members] : by_auction) {
        const BidRecord& head = *members.front();
        bool consistent = true;
        for (const auto* m : members) {
            if (m->procurer_id != head.procurer_id || m->region_id != head.region_id ||
                *m->reserve_price != *head.reserve_price || *m->start_date != *head.start_date ||
                *m->end_date != *head.end_date) {
                consistent = false;
                break;
            }
        }
        if (!consistent) {
            result.diagnostics.push_back("auction " + id + ": inconsistent metadata across bids");
            ++result.dropped;
            continue;
        }
        Auction a;
        a.auction_id = id;
        a.procurer_id = head.procurer_id;
        a.region_id = head.region_id;
        a.reserve_price = *head.reserve_price;
        a.start_date = *head.start_date;
        a.end_date = *head.end_date;
        for (const auto* m : members) a.bids.push_back({m->firm_id, *m->price, *m->bid_date});
        a.winner = a.winning_bid().firm_id;
        std::unordered_set<std::string> firms;
        for (const auto& b : a.bids) firms.insert(b.firm_id);
        a.is_single = firms.size() == 1;
        // Canonical storage order: by bid time, then firm.
        std::sort(a.bids.begin(), a.bids.end(), [](const AuctionBid& l, const AuctionBid& r) {
            return std::tie(l.bid_date, l.firm_id, l.price) < std::tie(r.bid_date, r.firm_id, r.price);
        });
        result.auctions.push_back(std::move(a));
    }
    return result;
}

}  // namespace bidscreen::ingest
