#include "bidscreen/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <set>

#include "bidscreen/csv.hpp"

namespace bidscreen::config {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* expected) {
    throw Error("config key " + std::string(key) + ": expected " + expected + ", got '" +
                std::string(value) + "'");
}

double to_double(std::string_view key, std::string_view v) {
    double d = 0.0;
    if (!csv::parse_double(v, d) || !std::isfinite(d)) bad_value(key, v, "a number");
    return d;
}

long long to_int(std::string_view key, std::string_view v, long long lo) {
    long long i = 0;
    if (!csv::parse_int(v, i) || i < lo) bad_value(key, v, lo > 0 ? "a positive integer" : "an integer");
    return i;
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
    std::uint64_t out = 0;
    const auto* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end || v.empty()) bad_value(key, v, "an unsigned integer");
    return out;
}

bool to_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    bad_value(key, v, "true or false");
}

std::set<std::string> to_set(std::string_view v) {
    std::set<std::string> out;
    while (!v.empty()) {
        const auto comma = v.find(',');
        const auto item = trim(v.substr(0, comma));
        if (!item.empty()) out.emplace(item);
        if (comma == std::string_view::npos) break;
        v.remove_prefix(comma + 1);
    }
    return out;
}

std::string from_set(const std::set<std::string>& s) {
    std::string out;
    for (const auto& item : s) {
        if (!out.empty()) out += ',';
        out += item;
    }
    return out;
}

std::string num(double d) { return csv::format_double(d); }
std::string num(long long i) { return std::to_string(i); }

struct Key {
    const char* name;
    bool reproducible;  // affects artifacts
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, std::string_view)> set;
};

#define BS_DOUBLE(key, field)                                                    \
    Key{key, true, [](const RunConfig& c) { return num(c.field); },              \
        [](RunConfig& c, std::string_view v) { c.field = to_double(key, v); }}
#define BS_INT(key, field, lo)                                                          \
    Key{key, true, [](const RunConfig& c) { return num((long long)c.field); },          \
        [](RunConfig& c, std::string_view v) {                                          \
            c.field = static_cast<decltype(c.field)>(to_int(key, v, lo));               \
        }}
#define BS_BOOL(key, field)                                                            \
    Key{key, true, [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); }, \
        [](RunConfig& c, std::string_view v) { c.field = to_bool(key, v); }}
#define BS_SET(key, field)                                                  \
    Key{key, true, [](const RunConfig& c) { return from_set(c.field); },    \
        [](RunConfig& c, std::string_view v) { c.field = to_set(v); }}

const std::vector<Key>& table() {
    static const std::vector<Key> keys = {
        Key{"input", false, [](const RunConfig& c) { return c.input; },
            [](RunConfig& c, std::string_view v) { c.input = std::string(v); }},
        Key{"out", false, [](const RunConfig& c) { return c.out; },
            [](RunConfig& c, std::string_view v) { c.out = std::string(v); }},
        Key{"seed", true, [](const RunConfig& c) { return std::to_string(c.seed); },
            [](RunConfig& c, std::string_view v) { c.seed = to_u64("seed", v); }},
        Key{"threads", false, [](const RunConfig& c) { return std::to_string(c.threads); },
            [](RunConfig& c, std::string_view v) { c.threads = int(to_int("threads", v, 1)); }},

        BS_DOUBLE("clean.reserve_cap", cleaning.reserve_cap),
        BS_DOUBLE("clean.low_reserve", cleaning.low_reserve),
        BS_SET("clean.baikonur_regions", cleaning.baikonur_regions),

        BS_DOUBLE("features.reserve_max", features.reserve_max),
        BS_SET("features.moscow_regions", features.moscow_regions),
        BS_BOOL("features.check_regions", check_regions),

        BS_INT("ntc.n_trees", ntc.n_trees, 1),
        BS_INT("ntc.max_depth", ntc.max_depth, 1),
        BS_DOUBLE("ntc.learning_rate", ntc.learning_rate),
        BS_INT("ntc.min_leaf", ntc.min_leaf, 1),
        BS_BOOL("ntc.histogram", ntc.histogram),
        BS_INT("ntc.bins", ntc.bins, 2),
        BS_DOUBLE("ntc.subsample", ntc.subsample),
        BS_DOUBLE("ntc.colsample", ntc.colsample),
        BS_INT("ntc.early_stopping_rounds", ntc.early_stopping_rounds, 0),
        BS_DOUBLE("ntc.validation_fraction", ntc.validation_fraction),
        BS_INT("ntc.folds", folds, 2),

        Key{"dedpul.bandwidth", true,
            [](const RunConfig& c) {
                return c.dedpul.bandwidth ? num(*c.dedpul.bandwidth) : std::string("auto");
            },
            [](RunConfig& c, std::string_view v) {
                if (v == "auto") c.dedpul.bandwidth.reset();
                else c.dedpul.bandwidth = to_double("dedpul.bandwidth", v);
            }},
        BS_DOUBLE("dedpul.quantile", dedpul.quantile),
        BS_DOUBLE("dedpul.ratio_floor", dedpul.ratio_floor),
        BS_INT("dedpul.grid_points", dedpul.grid_points, 2),
        BS_DOUBLE("dedpul.tol", dedpul.tol),
        BS_INT("dedpul.max_iter", dedpul.max_iter, 1),
        BS_DOUBLE("dedpul.cluster_threshold", dedpul.cluster_threshold),

        BS_INT("explain.max_depth", tree.max_depth, 1),
        BS_INT("explain.min_leaf", tree.min_leaf, 1),
        BS_DOUBLE("explain.holdout", tree_holdout),

        BS_INT("report.top_n", top_n, 0),

        BS_INT("synth.n_auctions", synth.n_auctions, 1),
        BS_DOUBLE("synth.w_competitive_fair", synth.weights.competitive_fair),
        BS_DOUBLE("synth.w_monopolist_fair", synth.weights.monopolist_fair),
        BS_DOUBLE("synth.w_oneday_corrupt", synth.weights.oneday_corrupt),
        BS_DOUBLE("synth.w_established_corrupt", synth.weights.established_corrupt),
        BS_INT("synth.regions", synth.regions, 1),
        BS_INT("synth.procurers_per_region", synth.procurers_per_region, 1),
        BS_DOUBLE("synth.bids_per_firm", synth.bids_per_firm),
        BS_INT("synth.min_bidders", synth.min_bidders, 2),
        BS_INT("synth.max_bidders", synth.max_bidders, 2),
        BS_DOUBLE("synth.ratio_mean", synth.ratio_mean),
        BS_DOUBLE("synth.ratio_sd", synth.ratio_sd),
        BS_DOUBLE("synth.entrant_bid_share", synth.entrant_bid_share),
        BS_DOUBLE("synth.entrant_extra_bids_mean", synth.entrant_extra_bids_mean),
        BS_INT("synth.entrant_lifetime_days", synth.entrant_lifetime_days, 1),
        BS_DOUBLE("synth.monopolist_reserve_bid_prob", synth.monopolist_reserve_bid_prob),
        BS_DOUBLE("synth.corrupt_at_reserve_prob", synth.corrupt_at_reserve_prob),
        BS_DOUBLE("synth.corrupt_ratio_min", synth.corrupt_ratio_min),
        BS_DOUBLE("synth.oneday_extra_auctions_mean", synth.oneday_extra_auctions_mean),
        BS_INT("synth.oneday_lifetime_days", synth.oneday_lifetime_days, 0),
        BS_DOUBLE("synth.established_extra_auctions_mean", synth.established_extra_auctions_mean),
    };
    return keys;
}

#undef BS_DOUBLE
#undef BS_INT
#undef BS_BOOL
#undef BS_SET

const Key& find(std::string_view key) {
    for (const auto& k : table())
        if (key == k.name) return k;
    throw Error("unknown config key: " + std::string(key));
}

}  // namespace

RunConfig::RunConfig() : out(default_out_dir()) {}

void RunConfig::set(std::string_view key, std::string_view value) {
    find(key).set(*this, trim(value));
}

std::string RunConfig::get(std::string_view key) const { return find(key).get(*this); }

void RunConfig::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file " + path.string());
    std::string line;
    std::size_t n = 0;
    while (csv::read_line(in, line)) {
        ++n;
        const auto body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos)
            throw Error(path.string() + ":" + std::to_string(n) + ": expected key = value");
        try {
            set(trim(body.substr(0, eq)), body.substr(eq + 1));
        } catch (const Error& e) {
            throw Error(path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
}

std::vector<std::string> RunConfig::keys() {
    std::vector<std::string> out;
    for (const auto& k : table()) out.emplace_back(k.name);
    return out;
}

std::string RunConfig::serialize(bool reproducible_only) const {
    std::string out;
    for (const auto& k : table()) {
        if (reproducible_only && !k.reproducible) continue;
        out += k.name;
        out += " = ";
        out += k.get(*this);
        out += '\n';
    }
    return out;
}

std::string RunConfig::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : serialize(true)) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void RunConfig::validate() const {
    if (out.empty()) throw Error("output directory is empty");
    if (threads < 1) throw Error("threads must be at least 1");
    if (!(cleaning.reserve_cap > 0.0)) throw Error("clean.reserve_cap must be positive");
    if (!(cleaning.low_reserve >= 0.0 && cleaning.low_reserve <= cleaning.reserve_cap))
        throw Error("clean.low_reserve must lie in [0, clean.reserve_cap]");
    if (!(features.reserve_max > 0.0)) throw Error("features.reserve_max must be positive");
    ntc.validate();
    if (folds < 2) throw Error("ntc.folds must be at least 2");
    dedpul.validate();
    tree.validate();
    if (!(tree_holdout >= 0.0 && tree_holdout < 1.0)) throw Error("explain.holdout must lie in [0, 1)");
    synth.validate();
}

std::string default_out_dir() {
    const char* env = std::getenv(kOutDirEnv);
    return env && *env ? std::string(env) : std::string(kDefaultOutDir);
}

}  // namespace bidscreen::config
