#include "bidscreen/common.hpp"

#include <chrono>
#include <cstdio>

namespace bidscreen {

namespace {

bool read_digits(std::string_view text, std::size_t pos, std::size_t count, int& out) {
    int value = 0;
    for (std::size_t i = pos; i < pos + count; ++i) {
        const char c = text[i];
        if (c < '0' || c > '9') return false;
        value = value * 10 + (c - '0');
    }
    out = value;
    return true;
}

}  // namespace

Timestamp make_timestamp(int year, unsigned month, unsigned day, int hour, int minute, int second) {
    using namespace std::chrono;
    const sys_days days{year_month_day{std::chrono::year{year}, std::chrono::month{month},
                                       std::chrono::day{day}}};
    return static_cast<Timestamp>(days.time_since_epoch().count()) * kSecondsPerDay + hour * 3600 +
           minute * 60 + second;
}

bool parse_timestamp(std::string_view text, Timestamp& out) {
    // 0123456789012345678
    // YYYY-MM-DDTHH:MM:SS
    if (text.size() != 19 || text[4] != '-' || text[7] != '-' || text[10] != 'T' ||
        text[13] != ':' || text[16] != ':')
        return false;
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
    if (!read_digits(text, 0, 4, y) || !read_digits(text, 5, 2, mo) || !read_digits(text, 8, 2, d) ||
        !read_digits(text, 11, 2, h) || !read_digits(text, 14, 2, mi) || !read_digits(text, 17, 2, s))
        return false;
    if (h > 23 || mi > 59 || s > 59) return false;
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{unsigned(mo)},
                                          std::chrono::day{unsigned(d)}};
    if (!ymd.ok()) return false;
    out = make_timestamp(y, unsigned(mo), unsigned(d), h, mi, s);
    return true;
}

std::string format_timestamp(Timestamp ts) {
    using namespace std::chrono;
    const auto day = day_index(ts);
    const auto secs = ts - day * kSecondsPerDay;
    const year_month_day ymd{sys_days{days{day}}};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", int(ymd.year()),
                  unsigned(ymd.month()), unsigned(ymd.day()), int(secs / 3600),
                  int(secs / 60 % 60), int(secs % 60));
    return buf;
}

int year_of(Timestamp ts) {
    using namespace std::chrono;
    const year_month_day ymd{sys_days{days{day_index(ts)}}};
    return int(ymd.year());
}

}  // namespace bidscreen
