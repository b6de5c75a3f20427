#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "bidscreen/common.hpp"
#include "bidscreen/ingest.hpp"

namespace fixtures {

inline bidscreen::Timestamp ts(const std::string& text) {
    bidscreen::Timestamp t = 0;
    if (!bidscreen::parse_timestamp(text, t)) throw bidscreen::Error("bad fixture timestamp " + text);
    return t;
}

inline bidscreen::ingest::BidRecord bid(std::string auction, std::string procurer, std::string firm,
                                        std::string region, double reserve, double price,
                                        const std::string& start, const std::string& end,
                                        const std::string& when) {
    bidscreen::ingest::BidRecord r;
    r.auction_id = std::move(auction);
    r.procurer_id = std::move(procurer);
    r.firm_id = std::move(firm);
    r.region_id = std::move(region);
    r.reserve_price = reserve;
    r.price = price;
    r.start_date = ts(start);
    r.end_date = ts(end);
    r.bid_date = ts(when);
    return r;
}

/// Scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;
    TempDir() {
        std::random_device rd;
        path = std::filesystem::temp_directory_path() /
               ("bidscreen-test-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

}  // namespace fixtures
