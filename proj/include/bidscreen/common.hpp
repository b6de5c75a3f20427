#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace bidscreen {

/// Seconds since 1970-01-01T00:00:00 (UTC, no leap seconds).
using Timestamp = std::int64_t;

inline constexpr std::int64_t kSecondsPerDay = 86400;

/// Raised for contract violations and unrecoverable input problems.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parses `YYYY-MM-DDTHH:MM:SS`. Returns false on any deviation from that shape
/// or on an out-of-range calendar field.
bool parse_timestamp(std::string_view text, Timestamp& out);

/// Inverse of parse_timestamp.
std::string format_timestamp(Timestamp ts);

/// Calendar day index (days since epoch) of a timestamp, floor semantics.
constexpr std::int64_t day_index(Timestamp ts) {
    return ts >= 0 ? ts / kSecondsPerDay : -((-ts + kSecondsPerDay - 1) / kSecondsPerDay);
}

/// Gregorian year of a timestamp.
int year_of(Timestamp ts);

/// Timestamp of midnight on the given civil date.
Timestamp make_timestamp(int year, unsigned month, unsigned day, int hour = 0, int minute = 0,
                         int second = 0);

}  // namespace bidscreen
