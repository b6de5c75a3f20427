#include "bidscreen/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "bidscreen/csv.hpp"

namespace bidscreen::features {

const std::array<const char*, kFeatureCount>& feature_names() {
    static const std::array<const char*, kFeatureCount> names = {
        "single",  "bid_date_gap", "bid_price_ratio", "con_met",     "con_win",  "sel_num",
        "sel_period", "au_reserve", "au_duration",    "au_moscow",   "buy_unique"};
    return names;
}

ModelVector Instance::model_features() const {
    ModelVector v{};
    std::copy(x.begin() + 1, x.end(), v.begin());
    return v;
}

std::set<std::string> default_region_codes() {
    std::set<std::string> codes;
    char buf[8];
    auto add = [&](int code) {
        std::snprintf(buf, sizeof buf, "%02d", code);
        codes.insert(buf);
    };
    for (int c = 1; c <= 79; ++c) add(c);
    for (int c : {83, 86, 87, 89, 91, 92, 99}) add(c);
    return codes;
}

namespace {

struct FirmHistory {
    std::unordered_set<std::string> auctions;
    Timestamp first_bid = 0;
    Timestamp last_bid = 0;
    bool seen = false;
    std::size_t wins = 0;
};

struct PairHistory {
    Timestamp earliest_start = std::numeric_limits<Timestamp>::max();
    std::size_t wins = 0;
};

struct ProcurerHistory {
    std::size_t auctions = 0;
    std::unordered_set<std::string> winners;
};

std::string pair_key(const std::string& firm, const std::string& procurer) {
    std::string key = firm;
    key.push_back('\x1f');
    key += procurer;
    return key;
}

}  // namespace

FeatureResult compute_features(const std::vector<ingest::Auction>& auctions,
                               const FeatureConfig& config) {
    std::unordered_map<std::string, FirmHistory> firms;
    std::unordered_map<std::string, PairHistory> pairs;
    std::unordered_map<std::string, ProcurerHistory> procurers;

    for (const auto& a : auctions) {
        auto& proc = procurers[a.procurer_id];
        ++proc.auctions;
        proc.winners.insert(a.winner);
        ++firms[a.winner].wins;
        ++pairs[pair_key(a.winner, a.procurer_id)].wins;
        for (const auto& b : a.bids) {
            auto& f = firms[b.firm_id];
            f.auctions.insert(a.auction_id);
            if (!f.seen) {
                f.first_bid = f.last_bid = b.bid_date;
                f.seen = true;
            } else {
                f.first_bid = std::min(f.first_bid, b.bid_date);
                f.last_bid = std::max(f.last_bid, b.bid_date);
            }
            auto& p = pairs[pair_key(b.firm_id, a.procurer_id)];
            p.earliest_start = std::min(p.earliest_start, a.start_date);
        }
    }

    FeatureResult result;
    std::vector<const ingest::Auction*> ordered;
    ordered.reserve(auctions.size());
    for (const auto& a : auctions) ordered.push_back(&a);
    std::sort(ordered.begin(), ordered.end(),
              [](auto* l, auto* r) { return l->auction_id < r->auction_id; });

    for (const auto* a : ordered) {
        const bool moscow = config.moscow_regions.count(a->region_id) > 0;
        if (!config.known_regions.empty() && !config.known_regions.count(a->region_id))
            result.diagnostics.push_back("auction " + a->auction_id + ": unknown region " +
                                         a->region_id);
        const auto& proc = procurers.at(a->procurer_id);
        const double buy_unique = double(proc.winners.size()) / double(proc.auctions);
        const double duration = double(day_index(a->end_date) - day_index(a->start_date));

        std::vector<const ingest::AuctionBid*> bids;
        for (const auto& b : a->bids) bids.push_back(&b);
        std::sort(bids.begin(), bids.end(), [](auto* l, auto* r) {
            return std::tie(l->firm_id, l->bid_date, l->price) <
                   std::tie(r->firm_id, r->bid_date, r->price);
        });
        for (const auto* b : bids) {
            const auto& firm = firms.at(b->firm_id);
            const auto& pair = pairs.at(pair_key(b->firm_id, a->procurer_id));
            Instance inst;
            inst.auction_id = a->auction_id;
            inst.firm_id = b->firm_id;
            inst.s = a->is_single ? 0 : 1;
            inst.year = year_of(a->end_date);
            auto& x = inst.x;
            x[Single] = a->is_single ? 1.0 : 0.0;
            x[BidDateGap] = double(a->end_date - b->bid_date);
            x[BidPriceRatio] = b->price / a->reserve_price;
            x[ConMet] = pair.earliest_start < a->start_date ? 1.0 : 0.0;
            x[ConWin] = firm.wins == 0 ? 0.0 : double(pair.wins) / double(firm.wins);
            x[SelNum] = double(firm.auctions.size());
            x[SelPeriod] = double(day_index(firm.last_bid) - day_index(firm.first_bid));
            x[AuReserve] = a->reserve_price / config.reserve_max;
            x[AuDuration] = duration;
            x[AuMoscow] = moscow ? 1.0 : 0.0;
            x[BuyUnique] = buy_unique;
            result.instances.push_back(std::move(inst));
        }
    }
    return result;
}

void write_instances(std::ostream& out, const std::vector<Instance>& instances) {
    out << csv::join(feature_columns()) << '\n';
    std::vector<std::string> row(feature_columns().size());
    for (const auto& inst : instances) {
        row[0] = inst.auction_id;
        row[1] = inst.firm_id;
        row[2] = std::to_string(inst.s);
        for (std::size_t f = 0; f < kFeatureCount; ++f) row[3 + f] = csv::format_double(inst.x[f]);
        out << csv::join(row) << '\n';
    }
}

std::vector<Instance> read_instances(const std::string& path) {
    const auto rows = csv::read_table(path, feature_columns());
    std::vector<Instance> out;
    out.reserve(rows.size());
    std::size_t line = 1;
    for (const auto& row : rows) {
        ++line;
        Instance inst;
        inst.auction_id = row[0];
        inst.firm_id = row[1];
        long long s = 0;
        if (!csv::parse_int(row[2], s) || (s != 0 && s != 1))
            throw Error(path + ":" + std::to_string(line) + ": s must be 0 or 1");
        inst.s = int(s);
        for (std::size_t f = 0; f < kFeatureCount; ++f)
            if (!csv::parse_double(row[3 + f], inst.x[f]))
                throw Error(path + ":" + std::to_string(line) + ": " + feature_names()[f] +
                            " not numeric");
        out.push_back(std::move(inst));
    }
    return out;
}

ClassStats describe(std::vector<double> values) {
    ClassStats st;
    st.count = values.size();
    if (values.empty()) return st;
    const double n = double(values.size());
    st.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - st.mean) * (v - st.mean);
    st.stddev = std::sqrt(ss / n);
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    st.median = values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
    return st;
}

SummaryTable summarize(const std::vector<Instance>& instances) {
    if (instances.empty()) throw Error("summarize requires at least one instance");
    SummaryTable table;
    for (std::size_t f = 1; f < kFeatureCount; ++f) {
        std::vector<double> single, competitive;
        for (const auto& inst : instances) (inst.single() ? single : competitive).push_back(inst.x[f]);
        table.rows.push_back({feature_names()[f], describe(std::move(single)),
                              describe(std::move(competitive))});
    }
    for (const auto& inst : instances) (inst.single() ? table.single_count : table.competitive_count)++;

    std::map<int, std::pair<std::unordered_set<std::string>, std::unordered_set<std::string>>> years;
    for (const auto& inst : instances) {
        if (inst.year == 0) continue;
        auto& [all, single] = years[inst.year];
        all.insert(inst.auction_id);
        if (inst.single()) single.insert(inst.auction_id);
    }
    for (const auto& [year, sets] : years) {
        YearRate yr;
        yr.year = year;
        yr.auctions = sets.first.size();
        yr.single_auctions = sets.second.size();
        yr.rate = double(yr.single_auctions) / double(yr.auctions);
        table.yearly.push_back(yr);
    }
    return table;
}

void write_summary(std::ostream& out, const SummaryTable& table) {
    out << "feature,mean_single1,mean_single0,median_single1,median_single0,std_single1,"
           "std_single0\n";
    for (const auto& row : table.rows) {
        out << row.name << ',' << csv::format_double(row.single.mean) << ','
            << csv::format_double(row.competitive.mean) << ','
            << csv::format_double(row.single.median) << ','
            << csv::format_double(row.competitive.median) << ','
            << csv::format_double(row.single.stddev) << ','
            << csv::format_double(row.competitive.stddev) << '\n';
    }
    out << "count," << table.single_count << ',' << table.competitive_count << ",,,,\n";
}

void write_yearly(std::ostream& out, const SummaryTable& table) {
    out << "year,auctions,single_bidder_auctions,single_bidder_rate\n";
    for (const auto& y : table.yearly)
        out << y.year << ',' << y.auctions << ',' << y.single_auctions << ','
            << csv::format_double(y.rate) << '\n';
}

}  // namespace bidscreen::features
