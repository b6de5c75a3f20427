#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "bidscreen/features.hpp"
#include "bidscreen/ingest.hpp"
#include "bidscreen/synth.hpp"
#include "fixtures.hpp"

using namespace bidscreen;
using namespace bidscreen::synth;

namespace {

ScenarioConfig scenario(std::size_t n, double comp, double mono, double oneday, double est,
                        std::uint64_t seed = 5) {
    ScenarioConfig c;
    c.n_auctions = n;
    c.weights = {comp, mono, oneday, est};
    c.seed = seed;
    return c;
}

double single_rate(const std::vector<ingest::Auction>& auctions) {
    const auto singles = std::count_if(auctions.begin(), auctions.end(), [](auto& a) { return a.is_single; });
    return double(singles) / double(auctions.size());
}

std::string csv_of(const Dataset& d) {
    std::ostringstream out;
    ingest::write_bids(out, d.bids);
    write_ground_truth(out, d.truth);
    return out.str();
}

}  // namespace

TEST_CASE("alpha_true follows from the weights") {
    ScenarioConfig c;
    CHECK(c.single_rate() == doctest::Approx(0.5));
    CHECK(c.alpha_true() == doctest::Approx(0.46));
    c.weights = {1, 0, 0, 0};
    CHECK(c.alpha_true() == 0.0);
    c.weights = {0.2, 0.4, 0.4, 0.0};
    CHECK(c.alpha_true() == doctest::Approx(0.5));
}

TEST_CASE("all-competitive weights give no single-bidder auctions") {
    const auto d = generate(scenario(3000, 1, 0, 0, 0));
    const auto grouped = ingest::group_auctions(ingest::clean(d.bids).records);
    CHECK(grouped.auctions.size() == 3000);
    CHECK(single_rate(grouped.auctions) == 0.0);
    for (const auto& a : grouped.auctions) {
        CHECK(a.bids.size() >= 2);
        CHECK(a.bids.size() <= 6);
    }
    CHECK(d.truth.alpha_true == 0.0);
}

TEST_CASE("all-monopolist weights give single-bidder auctions") {
    auto c = scenario(3000, 0, 1, 0, 0);
    c.monopolist_reserve_bid_prob = 1.0;
    const auto d = generate(c);
    const auto grouped = ingest::group_auctions(ingest::clean(d.bids).records);
    CHECK(grouped.auctions.size() == 3000);
    CHECK(single_rate(grouped.auctions) == 1.0);
    for (const auto& a : grouped.auctions) {
        const double ratio = a.bids[0].price / a.reserve_price;
        CHECK(ratio >= 0.97 - 1e-6);
        CHECK(ratio <= 1.0);
    }
    CHECK(d.truth.alpha_true == 1.0);
}

TEST_CASE("single-bidder rate converges to the configured rate") {
    auto c = scenario(100000, 0.5, 0.23, 0.17, 0.10, 17);
    const auto d = generate(c);
    const auto grouped = ingest::group_auctions(d.bids);
    CHECK(std::abs(single_rate(grouped.auctions) - c.single_rate()) <= 0.01);
    CHECK(std::abs(d.truth.alpha_true - c.alpha_true()) <= 0.01);
}

TEST_CASE("default rows survive cleaning untouched") {
    ScenarioConfig c;
    c.n_auctions = 20000;
    const auto d = generate(c);
    CHECK(d.bids.size() > 45000);
    CHECK(d.bids.size() < 55000);
    const auto cleaned = ingest::clean(d.bids);
    CHECK(cleaned.report.total_rejected() == 0);
    CHECK(cleaned.records.size() == d.bids.size());
    const auto grouped = ingest::group_auctions(cleaned.records);
    CHECK(grouped.dropped == 0);
    CHECK(grouped.auctions.size() == c.n_auctions);
    CHECK(d.truth.alpha_true == doctest::Approx(0.46).epsilon(1e-12));

    features::FeatureConfig fc;
    fc.known_regions = features::default_region_codes();
    CHECK(features::compute_features(grouped.auctions, fc).diagnostics.empty());

    // Rows are ordered by auction id and every truth row matches one auction.
    CHECK(std::is_sorted(d.bids.begin(), d.bids.end(),
                         [](auto& l, auto& r) { return l.auction_id < r.auction_id; }));
    REQUIRE(d.truth.auction_id.size() == grouped.auctions.size());
    for (std::size_t i = 0; i < grouped.auctions.size(); ++i)
        CHECK(d.truth.auction_id[i] == grouped.auctions[i].auction_id);
}

TEST_CASE("generation is deterministic given the seed") {
    const auto a = csv_of(generate(scenario(2000, 0.5, 0.23, 0.17, 0.10, 3)));
    const auto b = csv_of(generate(scenario(2000, 0.5, 0.23, 0.17, 0.10, 3)));
    const auto c = csv_of(generate(scenario(2000, 0.5, 0.23, 0.17, 0.10, 4)));
    CHECK(a == b);
    CHECK(a != c);
}

TEST_CASE("planted regime signatures show up in the features") {
    const auto d = generate(scenario(20000, 0.5, 0.23, 0.17, 0.10, 9));
    const auto grouped = ingest::group_auctions(d.bids);
    const auto inst = features::compute_features(grouped.auctions, {}).instances;
    std::map<std::string, Regime> regime;
    for (std::size_t i = 0; i < d.truth.auction_id.size(); ++i) regime[d.truth.auction_id[i]] = d.truth.regime[i];

    std::map<Regime, std::vector<const features::Instance*>> by;
    for (const auto& i : inst) by[regime.at(i.auction_id)].push_back(&i);
    auto mean = [&](Regime r, std::size_t f) {
        double s = 0;
        for (auto* i : by[r]) s += i->x[f];
        return s / double(by[r].size());
    };

    for (auto r : {Regime::MonopolistFair, Regime::OnedayCorrupt, Regime::EstablishedCorrupt})
        for (auto* i : by[r]) CHECK(i->single());
    for (auto* i : by[Regime::CompetitiveFair]) CHECK_FALSE(i->single());

    for (auto r : {Regime::OnedayCorrupt, Regime::EstablishedCorrupt})
        for (auto* i : by[r]) CHECK(i->x[features::BidPriceRatio] >= 0.97 - 1e-6);
    for (auto* i : by[Regime::OnedayCorrupt]) CHECK(i->x[features::ConMet] == 0.0);

    CHECK(mean(Regime::MonopolistFair, features::BidPriceRatio) == doctest::Approx(0.81).epsilon(0.03));
    CHECK(mean(Regime::OnedayCorrupt, features::SelPeriod) < mean(Regime::MonopolistFair, features::SelPeriod));
    CHECK(mean(Regime::OnedayCorrupt, features::SelNum) < mean(Regime::MonopolistFair, features::SelNum));
    CHECK(mean(Regime::EstablishedCorrupt, features::ConMet) > 0.8);
    CHECK(mean(Regime::EstablishedCorrupt, features::ConWin) > mean(Regime::MonopolistFair, features::ConWin));
    CHECK(mean(Regime::EstablishedCorrupt, features::SelPeriod) > mean(Regime::OnedayCorrupt, features::SelPeriod));
}

TEST_CASE("ground truth round-trips and enforces the corrupt bit") {
    fixtures::TempDir dir;
    const auto d = generate(scenario(500, 0.5, 0.23, 0.17, 0.10, 2));
    const auto path = (dir.path / "gt.csv").string();
    {
        std::ofstream f(path);
        write_ground_truth(f, d.truth);
    }
    const auto back = read_ground_truth(path);
    CHECK(back.auction_id == d.truth.auction_id);
    CHECK(back.regime == d.truth.regime);
    CHECK(back.alpha_true == doctest::Approx(d.truth.alpha_true));
    for (std::size_t i = 0; i < back.regime.size(); ++i)
        CHECK(back.corrupt(i) == (back.regime[i] == Regime::OnedayCorrupt ||
                                  back.regime[i] == Regime::EstablishedCorrupt));

    {
        std::ofstream f(path);
        f << "auction_id,regime,corrupt\nA1,monopolist_fair,1\n";
    }
    CHECK_THROWS_AS(read_ground_truth(path), Error);
    {
        std::ofstream f(path);
        f << "auction_id,regime,corrupt\nA1,pirate,0\n";
    }
    CHECK_THROWS_AS(read_ground_truth(path), Error);
}

TEST_CASE("infeasible scenarios are rejected") {
    CHECK_THROWS_AS(generate(scenario(0, 1, 0, 0, 0)), Error);
    CHECK_THROWS_AS(generate(scenario(100, 0.5, 0.5, 0.5, 0)), Error);
    CHECK_THROWS_AS(generate(scenario(100, 1.2, -0.2, 0, 0)), Error);
    // One oneday auction cannot produce a firm that survives cleaning.
    CHECK_THROWS_AS(generate(scenario(10, 0.9, 0.0, 0.1, 0)), Error);
    auto c = scenario(100, 1, 0, 0, 0);
    c.min_bidders = 1;
    CHECK_THROWS_AS(generate(c), Error);
    c = scenario(100, 1, 0, 0, 0);
    c.regions = 500;
    CHECK_THROWS_AS(generate(c), Error);
    c = scenario(100, 1, 0, 0, 0);
    c.entrant_bid_share = 1.0;
    CHECK_THROWS_AS(generate(c), Error);
}
