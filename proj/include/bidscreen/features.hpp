#pragma once

#include <array>
#include <cstddef>
#include <istream>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "bidscreen/ingest.hpp"

namespace bidscreen::features {

/// Feature columns in output order. `Single` defines the PU label and is not a model input.
enum Feature : std::size_t {
    Single = 0,
    BidDateGap,     // seconds from bid to auction end
    BidPriceRatio,  // price / reserve
    ConMet,         // firm bid with this procurer in an auction that started strictly earlier
    ConWin,         // firm's wins with this procurer / firm's wins
    SelNum,         // distinct auctions the firm bid in
    SelPeriod,      // days between the firm's first and last bid
    AuReserve,      // reserve / maximum reserve
    AuDuration,     // days from start to end
    AuMoscow,
    BuyUnique,      // distinct winners of the procurer / auctions held by the procurer
};
inline constexpr std::size_t kFeatureCount = 11;
inline constexpr std::size_t kModelFeatureCount = kFeatureCount - 1;

const std::array<const char*, kFeatureCount>& feature_names();

using FeatureVector = std::array<double, kFeatureCount>;
using ModelVector = std::array<double, kModelFeatureCount>;

struct Instance {
    std::string auction_id;
    std::string firm_id;
    int s = 0;  // 1 iff the bid is in a multi-bidder auction (labelled fair)
    FeatureVector x{};
    int year = 0;  // end_date year; 0 when read back from a features file

    ModelVector model_features() const;
    bool single() const { return x[Single] != 0.0; }
};

struct FeatureConfig {
    double reserve_max = 500000.0;
    std::set<std::string> moscow_regions = {"77", "50"};
    /// Region dictionary; an auction outside it gets a diagnostic. Empty disables the check.
    std::set<std::string> known_regions;
};

/// Federal-subject codes used as the default region dictionary (two-digit codes 1-89 in
/// use during 2014-2018, Crimea 91, Sevastopol 92, Baikonur 99).
std::set<std::string> default_region_codes();

struct FeatureResult {
    std::vector<Instance> instances;  // ordered by (auction_id, firm_id, bid_date)
    std::vector<std::string> diagnostics;
};

/// One instance per bid. Firm, procurer and pair histories are aggregated over the whole
/// input first; per-bid evaluation then reads only those indices.
FeatureResult compute_features(const std::vector<ingest::Auction>& auctions,
                               const FeatureConfig& config = {});

inline const std::vector<std::string>& feature_columns() {
    static const std::vector<std::string> cols = {
        "auction_id", "firm_id",  "s",          "single",      "bid_date_gap",
        "bid_price_ratio", "con_met", "con_win", "sel_num", "sel_period",
        "au_reserve", "au_duration", "au_moscow", "buy_unique"};
    return cols;
}

void write_instances(std::ostream& out, const std::vector<Instance>& instances);
std::vector<Instance> read_instances(const std::string& path);

struct ClassStats {
    std::size_t count = 0;
    double mean = 0.0;
    double median = 0.0;
    double stddev = 0.0;  // population
};

struct FeatureRow {
    std::string name;
    ClassStats single;       // single = 1
    ClassStats competitive;  // single = 0
};

struct YearRate {
    int year = 0;
    std::size_t auctions = 0;
    std::size_t single_auctions = 0;
    double rate = 0.0;
};

struct SummaryTable {
    std::vector<FeatureRow> rows;  // the ten model features
    std::size_t single_count = 0;
    std::size_t competitive_count = 0;
    std::vector<YearRate> yearly;  // empty when instances carry no year
};

ClassStats describe(std::vector<double> values);

/// Per-class statistics for each model feature and the yearly single-bidder rate
/// (auction level, year of end_date). Throws on empty input.
SummaryTable summarize(const std::vector<Instance>& instances);

/// Layout: feature, then mean/median/std for single=1 and single=0.
void write_summary(std::ostream& out, const SummaryTable& table);
void write_yearly(std::ostream& out, const SummaryTable& table);

}  // namespace bidscreen::features
