#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "bidscreen/common.hpp"
#include "bidscreen/ingest.hpp"

namespace bidscreen::synth {

enum class Regime { CompetitiveFair = 0, MonopolistFair, OnedayCorrupt, EstablishedCorrupt };
inline constexpr std::size_t kRegimeCount = 4;
const char* regime_name(Regime r);
inline bool is_corrupt(Regime r) {
    return r == Regime::OnedayCorrupt || r == Regime::EstablishedCorrupt;
}

struct RegimeWeights {
    double competitive_fair = 0.50;
    double monopolist_fair = 0.23;
    double oneday_corrupt = 0.17;
    double established_corrupt = 0.10;

    double operator[](Regime r) const;
};

/// Generator settings. The defaults give ~50,000 bids, a 50% single-bidder auction rate
/// and a fair share of 0.46 among single-bidder auctions.
struct ScenarioConfig {
    std::size_t n_auctions = 20000;
    RegimeWeights weights;
    std::uint64_t seed = 20140128;

    // Market layout: each region has its own procurers and a pool of established firms.
    std::size_t regions = 20;
    std::size_t procurers_per_region = 2;
    double bids_per_firm = 150.0;  // sizes the regional firm pools

    // Calendar and prices, inside the ranges that survive cleaning.
    Timestamp window_start = make_timestamp(2014, 1, 28);
    Timestamp window_end = make_timestamp(2018, 3, 30);
    double reserve_min = 3440.0;
    double reserve_max = 500000.0;
    double reserve_skew = 1.6;  // reserve = min + (max - min) u^skew
    double duration_mean_days = 8.0;
    double duration_sd_days = 2.9;
    double bid_gap_mean_seconds = 140000.0;

    // competitive_fair
    int min_bidders = 2;
    int max_bidders = 6;
    double ratio_mean = 0.81;
    double ratio_sd = 0.12;
    double ratio_floor = 0.3;

    // Entrants: a share of fair pool bids is handed to short-lived fair firms that place
    // 2 + Geometric bids in one region within their lifetime.
    double entrant_bid_share = 0.05;
    double entrant_extra_bids_mean = 3.0;
    int entrant_lifetime_days = 60;

    // monopolist_fair: a pool firm that is alone in the auction. By default it prices like
    // a competitive bidder; raising this probability makes it bid the reserve instead.
    double monopolist_reserve_bid_prob = 0.0;

    // Corrupt bids sit at the reserve with this probability, otherwise in [corrupt_ratio_min, 1).
    double corrupt_at_reserve_prob = 0.7;
    double corrupt_ratio_min = 0.97;

    // oneday_corrupt: short-lived firms, each winning 2 + Geometric auctions from distinct
    // procurers within its lifetime.
    double oneday_extra_auctions_mean = 1.0;
    int oneday_lifetime_days = 30;

    // established_corrupt: long-lived firms tied to one procurer.
    double established_extra_auctions_mean = 8.0;

    /// Fair share among single-bidder auctions implied by the weights.
    double alpha_true() const;
    /// Share of single-bidder auctions implied by the weights.
    double single_rate() const;
    void validate() const;
};

struct GroundTruth {
    std::vector<std::string> auction_id;
    std::vector<Regime> regime;
    double alpha_true = 0.0;  // realised fair share among single-bidder auctions

    bool corrupt(std::size_t i) const { return is_corrupt(regime[i]); }
};

struct Dataset {
    std::vector<ingest::BidRecord> bids;  // ordered by auction_id
    GroundTruth truth;
};

/// Deterministic given config.seed. Throws on an infeasible config.
Dataset generate(const ScenarioConfig& config);

void write_ground_truth(std::ostream& out, const GroundTruth& truth);
GroundTruth read_ground_truth(const std::string& path);

}  // namespace bidscreen::synth
