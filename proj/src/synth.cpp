#include "bidscreen/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>

#include "bidscreen/csv.hpp"
#include "bidscreen/features.hpp"
#include "bidscreen/random.hpp"

namespace bidscreen::synth {

const char* regime_name(Regime r) {
    switch (r) {
        case Regime::CompetitiveFair: return "competitive_fair";
        case Regime::MonopolistFair: return "monopolist_fair";
        case Regime::OnedayCorrupt: return "oneday_corrupt";
        case Regime::EstablishedCorrupt: return "established_corrupt";
    }
    return "?";
}

double RegimeWeights::operator[](Regime r) const {
    switch (r) {
        case Regime::CompetitiveFair: return competitive_fair;
        case Regime::MonopolistFair: return monopolist_fair;
        case Regime::OnedayCorrupt: return oneday_corrupt;
        case Regime::EstablishedCorrupt: return established_corrupt;
    }
    return 0.0;
}

double ScenarioConfig::alpha_true() const {
    const double singles = single_rate();
    return singles > 0.0 ? weights.monopolist_fair / singles : 0.0;
}

double ScenarioConfig::single_rate() const {
    return weights.monopolist_fair + weights.oneday_corrupt + weights.established_corrupt;
}

void ScenarioConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw Error(std::string("synth: ") + what);
    };
    require(n_auctions > 0, "n_auctions must be positive");
    double sum = 0.0;
    for (std::size_t r = 0; r < kRegimeCount; ++r) {
        const double w = weights[Regime(r)];
        require(std::isfinite(w) && w >= 0.0, "regime weights must be nonnegative");
        sum += w;
    }
    require(std::abs(sum - 1.0) <= 1e-9, "regime weights must sum to 1");
    require(regions >= 1, "regions must be at least 1");
    require(procurers_per_region >= 1, "procurers_per_region must be at least 1");
    require(bids_per_firm > 0.0, "bids_per_firm must be positive");
    require(reserve_min > 0.0 && reserve_min <= reserve_max, "reserve range is empty");
    require(reserve_skew > 0.0, "reserve_skew must be positive");
    require(duration_mean_days >= 1.0 && duration_sd_days >= 0.0, "bad duration distribution");
    require(bid_gap_mean_seconds > 0.0, "bid_gap_mean_seconds must be positive");
    require(min_bidders >= 2 && min_bidders <= max_bidders, "need 2 <= min_bidders <= max_bidders");
    require(ratio_sd > 0.0, "ratio_sd must be positive");
    require(ratio_floor >= 0.0 && ratio_floor < 1.0, "ratio_floor must lie in [0, 1)");
    require(ratio_mean > ratio_floor - 3 * ratio_sd && ratio_mean < 1.0 + 3 * ratio_sd,
            "ratio_mean too far outside [ratio_floor, 1]");
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    require(entrant_bid_share >= 0.0 && entrant_bid_share < 1.0,
            "entrant_bid_share must lie in [0, 1)");
    require(entrant_extra_bids_mean >= 0.0, "entrant_extra_bids_mean must be nonnegative");
    require(entrant_lifetime_days >= 1, "entrant_lifetime_days must be at least 1");
    require(prob(monopolist_reserve_bid_prob), "monopolist_reserve_bid_prob must lie in [0, 1]");
    require(prob(corrupt_at_reserve_prob), "corrupt_at_reserve_prob must lie in [0, 1]");
    require(corrupt_ratio_min > 0.0 && corrupt_ratio_min <= 1.0,
            "corrupt_ratio_min must lie in (0, 1]");
    require(oneday_extra_auctions_mean >= 0.0 && established_extra_auctions_mean >= 0.0,
            "auction-count means must be nonnegative");
    require(oneday_lifetime_days >= 0, "oneday_lifetime_days must be nonnegative");
    const double longest = 26.0 + oneday_lifetime_days;
    require(window_end - window_start > Timestamp(longest * kSecondsPerDay),
            "date window too short");
}

namespace {

constexpr int kMaxDurationDays = 26;

double fair_single_share(const std::vector<Regime>& regimes) {
    std::size_t singles = 0, fair_singles = 0;
    for (auto r : regimes) {
        if (r == Regime::CompetitiveFair) continue;
        ++singles;
        if (r == Regime::MonopolistFair) ++fair_singles;
    }
    return singles ? double(fair_singles) / double(singles) : 0.0;
}

struct DraftBid {
    std::size_t firm = 0;
    double ratio = 1.0;
    Timestamp bid_date = 0;
};

struct DraftAuction {
    Regime regime = Regime::CompetitiveFair;
    std::size_t procurer = 0;
    double reserve = 0.0;
    Timestamp start = 0;
    Timestamp end = 0;
    std::vector<DraftBid> bids;
};

std::string numbered(char prefix, std::size_t n, int width) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%c%0*zu", prefix, width, n);
    return buf;
}

double kopecks(double v) { return std::round(v * 100.0) / 100.0; }

class Generator {
public:
    explicit Generator(const ScenarioConfig& c) : c_(c), rng_(c.seed) {}

    Dataset run();

private:
    std::vector<std::size_t> regime_counts() const;
    void build_market();
    double draw_reserve();
    int draw_duration_days();
    void place(DraftAuction& a, Timestamp earliest, Timestamp latest_start);
    double fair_ratio();
    double reserve_ratio();
    Timestamp fair_bid_date(const DraftAuction& a);
    Timestamp early_bid_date(const DraftAuction& a);
    std::size_t group_size(double extra_mean);
    std::size_t new_firm();
    void fill_fair(DraftAuction& a);
    void fill_oneday(std::vector<DraftAuction*>& group);
    void fill_established(std::vector<DraftAuction*>& group);
    void recruit_entrants();
    void repair_single_appearances();

    const ScenarioConfig& c_;
    Rng rng_;
    std::vector<std::string> region_codes_;
    std::vector<std::string> procurer_ids_;
    std::vector<std::size_t> procurer_region_;
    std::vector<std::vector<std::size_t>> pools_;  // per region, pool firm indices
    std::vector<std::string> firm_ids_;
    std::vector<DraftAuction> auctions_;
};

std::vector<std::size_t> Generator::regime_counts() const {
    // Largest-remainder rounding so realised regime shares match the weights exactly.
    std::array<std::size_t, kRegimeCount> counts{};
    std::array<double, kRegimeCount> rem{};
    std::size_t assigned = 0;
    for (std::size_t r = 0; r < kRegimeCount; ++r) {
        const double exact = c_.weights[Regime(r)] * double(c_.n_auctions);
        counts[r] = std::size_t(std::floor(exact));
        rem[r] = exact - double(counts[r]);
        assigned += counts[r];
    }
    std::array<std::size_t, kRegimeCount> order{0, 1, 2, 3};
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return rem[a] > rem[b]; });
    for (std::size_t k = 0; assigned < c_.n_auctions; ++k, ++assigned) ++counts[order[k % kRegimeCount]];
    return {counts.begin(), counts.end()};
}

void Generator::build_market() {
    auto codes = features::default_region_codes();
    for (const char* skip : {"77", "50", "99"}) codes.erase(skip);
    std::vector<std::string> rest(codes.begin(), codes.end());
    rng_.shuffle(rest);
    region_codes_ = {"77", "50"};
    region_codes_.insert(region_codes_.end(), rest.begin(), rest.end());
    if (c_.regions > region_codes_.size())
        throw Error("synth: at most " + std::to_string(region_codes_.size()) + " regions available");
    region_codes_.resize(c_.regions);

    for (std::size_t r = 0; r < c_.regions; ++r)
        for (std::size_t p = 0; p < c_.procurers_per_region; ++p) {
            procurer_ids_.push_back(numbered('P', procurer_ids_.size() + 1, 5));
            procurer_region_.push_back(r);
        }

    const double mean_bidders = 0.5 * (c_.min_bidders + c_.max_bidders);
    const double pool_bids =
        double(c_.n_auctions) * (c_.weights.competitive_fair * mean_bidders + c_.weights.monopolist_fair);
    const auto per_region = std::max<std::size_t>(
        std::size_t(c_.max_bidders) + 2,
        std::size_t(std::ceil(pool_bids / double(c_.regions) / c_.bids_per_firm)));
    pools_.resize(c_.regions);
    for (auto& pool : pools_)
        for (std::size_t f = 0; f < per_region; ++f) pool.push_back(new_firm());
}

double Generator::draw_reserve() {
    const double u = std::pow(rng_.uniform(), c_.reserve_skew);
    return std::clamp(kopecks(c_.reserve_min + (c_.reserve_max - c_.reserve_min) * u), c_.reserve_min,
                      c_.reserve_max);
}

std::size_t Generator::new_firm() {
    firm_ids_.push_back(numbered('F', firm_ids_.size() + 1, 6));
    return firm_ids_.size() - 1;
}

int Generator::draw_duration_days() {
    const double d = std::round(rng_.normal(c_.duration_mean_days, c_.duration_sd_days));
    return int(std::clamp(d, 1.0, double(kMaxDurationDays)));
}

void Generator::place(DraftAuction& a, Timestamp earliest, Timestamp latest_start) {
    const int days = draw_duration_days();
    latest_start = std::min(latest_start, c_.window_end - Timestamp(days) * kSecondsPerDay);
    a.start = latest_start <= earliest ? earliest : Timestamp(rng_.between(earliest, latest_start));
    a.end = a.start + Timestamp(days) * kSecondsPerDay;
}

double Generator::fair_ratio() {
    for (;;) {
        const double r = rng_.normal(c_.ratio_mean, c_.ratio_sd);
        if (r >= c_.ratio_floor && r <= 1.0) return r;
    }
}

double Generator::reserve_ratio() {
    return rng_.bernoulli(c_.corrupt_at_reserve_prob) ? 1.0 : rng_.uniform(c_.corrupt_ratio_min, 1.0);
}

Timestamp Generator::fair_bid_date(const DraftAuction& a) {
    double u = 0.0;
    do u = rng_.uniform();
    while (u <= 0.0);
    const double gap = std::min(-c_.bid_gap_mean_seconds * std::log(u), double(a.end - a.start));
    return a.end - Timestamp(gap);
}

Timestamp Generator::early_bid_date(const DraftAuction& a) {
    const double span = double(a.end - a.start);
    return a.end - Timestamp(rng_.uniform(0.5, 1.0) * span);
}

std::size_t Generator::group_size(double extra_mean) {
    if (extra_mean <= 0.0) return 2;
    return 2 + std::size_t(rng_.geometric(1.0 / (1.0 + extra_mean)));
}

void Generator::fill_fair(DraftAuction& a) {
    a.procurer = std::size_t(rng_.below(procurer_ids_.size()));
    a.reserve = draw_reserve();
    place(a, c_.window_start, c_.window_end);
    const auto& pool = pools_[procurer_region_[a.procurer]];
    std::size_t k = 1;
    if (a.regime == Regime::CompetitiveFair)
        k = std::size_t(rng_.between(c_.min_bidders, c_.max_bidders));
    while (a.bids.size() < k) {
        const std::size_t firm = pool[rng_.below(pool.size())];
        if (std::any_of(a.bids.begin(), a.bids.end(), [&](auto& b) { return b.firm == firm; })) continue;
        DraftBid b;
        b.firm = firm;
        const bool at_reserve =
            a.regime == Regime::MonopolistFair && rng_.bernoulli(c_.monopolist_reserve_bid_prob);
        b.ratio = at_reserve ? reserve_ratio() : fair_ratio();
        b.bid_date = fair_bid_date(a);
        a.bids.push_back(b);
    }
}

void Generator::fill_oneday(std::vector<DraftAuction*>& group) {
    const std::size_t firm = new_firm();
    const Timestamp life = Timestamp(c_.oneday_lifetime_days) * kSecondsPerDay;
    const Timestamp latest_birth =
        c_.window_end - life - Timestamp(kMaxDurationDays) * kSecondsPerDay;
    const Timestamp birth = Timestamp(rng_.between(c_.window_start, latest_birth));
    // Each auction comes from a different procurer, so the firm never meets one twice.
    std::vector<std::size_t> used;
    for (auto* a : group) {
        std::size_t p = 0;
        do p = std::size_t(rng_.below(procurer_ids_.size()));
        while (used.size() < procurer_ids_.size() && std::find(used.begin(), used.end(), p) != used.end());
        used.push_back(p);
        a->procurer = p;
        a->reserve = draw_reserve();
        place(*a, birth, birth + life);
        a->bids.push_back({firm, reserve_ratio(), early_bid_date(*a)});
    }
}

void Generator::fill_established(std::vector<DraftAuction*>& group) {
    const std::size_t firm = new_firm();
    const std::size_t p = std::size_t(rng_.below(procurer_ids_.size()));
    for (auto* a : group) {
        a->procurer = p;
        a->reserve = draw_reserve();
        place(*a, c_.window_start, c_.window_end);
        a->bids.push_back({firm, reserve_ratio(), early_bid_date(*a)});
    }
}

void Generator::recruit_entrants() {
    if (c_.entrant_bid_share <= 0.0) return;
    struct Slot {
        Timestamp start;
        std::size_t auction;
        std::size_t bid;
    };
    std::vector<std::vector<Slot>> slots(c_.regions);
    std::size_t total = 0;
    for (std::size_t i = 0; i < auctions_.size(); ++i) {
        const auto& a = auctions_[i];
        if (is_corrupt(a.regime)) continue;
        for (std::size_t b = 0; b < a.bids.size(); ++b)
            slots[procurer_region_[a.procurer]].push_back({a.start, i, b});
        total += a.bids.size();
    }
    for (auto& region : slots)
        std::stable_sort(region.begin(), region.end(),
                         [](const Slot& l, const Slot& r) { return l.start < r.start; });

    const auto target = std::size_t(std::llround(c_.entrant_bid_share * double(total)));
    const Timestamp max_life = Timestamp(c_.entrant_lifetime_days) * kSecondsPerDay;
    std::vector<std::vector<bool>> taken(c_.regions);
    for (std::size_t r = 0; r < c_.regions; ++r) taken[r].assign(slots[r].size(), false);
    std::size_t moved = 0;
    for (std::size_t attempt = 0; moved < target && attempt < 20 * target + 100; ++attempt) {
        const auto r = std::size_t(rng_.below(c_.regions));
        if (slots[r].empty()) continue;
        const auto anchor = std::size_t(rng_.below(slots[r].size()));
        const Timestamp horizon = slots[r][anchor].start + Timestamp(rng_.uniform() * double(max_life));
        std::size_t hi = anchor;
        while (hi < slots[r].size() && slots[r][hi].start <= horizon) ++hi;
        const std::size_t want = group_size(c_.entrant_extra_bids_mean);
        std::vector<std::size_t> pick;
        for (std::size_t j = anchor; j < hi && pick.size() < want; ++j) {
            if (taken[r][j]) continue;
            const bool same_auction = std::any_of(pick.begin(), pick.end(), [&](std::size_t k) {
                return slots[r][k].auction == slots[r][j].auction;
            });
            if (!same_auction && rng_.bernoulli(0.5)) pick.push_back(j);
        }
        if (pick.size() < 2) continue;
        const std::size_t firm = new_firm();
        for (std::size_t j : pick) {
            taken[r][j] = true;
            auctions_[slots[r][j].auction].bids[slots[r][j].bid].firm = firm;
        }
        moved += pick.size();
    }
}

void Generator::repair_single_appearances() {
    // A pool firm drawn into only one auction would be removed by cleaning; hand that bid
    // to another firm of the same regional pool instead.
    std::vector<std::size_t> appearances(firm_ids_.size(), 0);
    std::vector<std::size_t> where(firm_ids_.size(), 0);
    for (std::size_t i = 0; i < auctions_.size(); ++i)
        for (const auto& b : auctions_[i].bids) {
            ++appearances[b.firm];
            where[b.firm] = i;
        }
    for (const auto& pool : pools_)
        for (std::size_t f : pool) {
            if (appearances[f] != 1) continue;
            auto& a = auctions_[where[f]];
            for (std::size_t g : pool) {
                if (appearances[g] < 1 || g == f) continue;
                if (std::any_of(a.bids.begin(), a.bids.end(), [&](auto& b) { return b.firm == g; }))
                    continue;
                for (auto& b : a.bids)
                    if (b.firm == f) b.firm = g;
                --appearances[f];
                ++appearances[g];
                break;
            }
        }
}

Dataset Generator::run() {
    c_.validate();
    const auto counts = regime_counts();
    for (auto r : {Regime::OnedayCorrupt, Regime::EstablishedCorrupt})
        if (counts[std::size_t(r)] == 1)
            throw Error(std::string("synth: regime ") + regime_name(r) +
                        " needs at least 2 auctions so its firm survives cleaning");

    build_market();
    auctions_.resize(c_.n_auctions);
    {
        std::vector<Regime> regimes;
        for (std::size_t r = 0; r < kRegimeCount; ++r) regimes.insert(regimes.end(), counts[r], Regime(r));
        rng_.shuffle(regimes);
        for (std::size_t i = 0; i < regimes.size(); ++i) auctions_[i].regime = regimes[i];
    }

    std::vector<DraftAuction*> oneday, established;
    for (auto& a : auctions_) {
        if (a.regime == Regime::OnedayCorrupt) oneday.push_back(&a);
        else if (a.regime == Regime::EstablishedCorrupt) established.push_back(&a);
        else fill_fair(a);
    }
    auto partition = [&](std::vector<DraftAuction*>& all, double extra_mean, auto fill) {
        for (std::size_t i = 0; i < all.size();) {
            std::size_t n = std::min(group_size(extra_mean), all.size() - i);
            if (all.size() - i - n == 1) ++n;  // never leave a lone auction behind
            std::vector<DraftAuction*> group(all.begin() + i, all.begin() + i + n);
            (this->*fill)(group);
            i += n;
        }
    };
    partition(oneday, c_.oneday_extra_auctions_mean, &Generator::fill_oneday);
    partition(established, c_.established_extra_auctions_mean, &Generator::fill_established);
    recruit_entrants();
    repair_single_appearances();

    Dataset out;
    for (std::size_t i = 0; i < auctions_.size(); ++i) {
        const auto& a = auctions_[i];
        const std::string id = numbered('A', i + 1, 7);
        out.truth.auction_id.push_back(id);
        out.truth.regime.push_back(a.regime);
        for (const auto& b : a.bids) {
            ingest::BidRecord rec;
            rec.auction_id = id;
            rec.procurer_id = procurer_ids_[a.procurer];
            rec.firm_id = firm_ids_[b.firm];
            rec.region_id = region_codes_[procurer_region_[a.procurer]];
            rec.reserve_price = a.reserve;
            rec.price = std::clamp(kopecks(b.ratio * a.reserve), 0.0, a.reserve);
            rec.start_date = a.start;
            rec.end_date = a.end;
            rec.bid_date = std::clamp(b.bid_date, a.start, a.end);
            out.bids.push_back(std::move(rec));
        }
    }
    out.truth.alpha_true = fair_single_share(out.truth.regime);
    return out;
}

}  // namespace

Dataset generate(const ScenarioConfig& config) { return Generator(config).run(); }

void write_ground_truth(std::ostream& out, const GroundTruth& truth) {
    out << "auction_id,regime,corrupt\n";
    for (std::size_t i = 0; i < truth.auction_id.size(); ++i)
        out << csv::escape(truth.auction_id[i]) << ',' << regime_name(truth.regime[i]) << ','
            << (truth.corrupt(i) ? 1 : 0) << '\n';
}

GroundTruth read_ground_truth(const std::string& path) {
    const auto rows = csv::read_table(path, {"auction_id", "regime", "corrupt"});
    GroundTruth truth;
    std::size_t line = 1;
    for (const auto& row : rows) {
        ++line;
        std::size_t r = 0;
        while (r < kRegimeCount && row[1] != regime_name(Regime(r))) ++r;
        if (r == kRegimeCount)
            throw Error(path + ":" + std::to_string(line) + ": unknown regime " + row[1]);
        if (row[2] != (is_corrupt(Regime(r)) ? "1" : "0"))
            throw Error(path + ":" + std::to_string(line) + ": corrupt bit disagrees with regime");
        truth.auction_id.push_back(row[0]);
        truth.regime.push_back(Regime(r));
    }
    truth.alpha_true = fair_single_share(truth.regime);
    return truth;
}

}  // namespace bidscreen::synth
