#include "loadshift/timeutil.hpp"

#include <array>
#include <charconv>
#include <cstdio>

namespace loadshift::timeutil {

std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097LL + static_cast<std::int64_t>(doe) - 719468;
}

CivilDate civil_from_days(std::int64_t z) noexcept {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    return {static_cast<int>(y + (m <= 2)), m, d};
}

int weekday_from_days(std::int64_t days) noexcept {
    // 1970-01-01 is a Thursday (= 3 with Monday = 0).
    return static_cast<int>(((days % 7) + 7 + 3) % 7);
}

namespace {

bool parse_uint(std::string_view s, std::size_t pos, std::size_t len, unsigned& out) {
    if (pos + len > s.size()) return false;
    unsigned v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
        const char c = s[i];
        if (c < '0' || c > '9') return false;
        v = v * 10 + static_cast<unsigned>(c - '0');
    }
    out = v;
    return true;
}

bool days_in_month_ok(int year, unsigned month, unsigned day) {
    static constexpr std::array<unsigned, 12> kDays{31, 28, 31, 30, 31, 30,
                                                    31, 31, 30, 31, 30, 31};
    if (month < 1 || month > 12 || day < 1) return false;
    unsigned lim = kDays[month - 1];
    const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    if (month == 2 && leap) lim = 29;
    return day <= lim;
}

}  // namespace

std::optional<std::int64_t> parse_date_days(std::string_view s) {
    if (s.size() != 10) return std::nullopt;
    unsigned y, m, d;
    if (!parse_uint(s, 0, 4, y) || s[4] != '-' || !parse_uint(s, 5, 2, m) ||
        s[7] != '-' || !parse_uint(s, 8, 2, d))
        return std::nullopt;
    if (!days_in_month_ok(static_cast<int>(y), m, d)) return std::nullopt;
    return days_from_civil(static_cast<int>(y), m, d);
}

std::optional<MinuteIndex> parse_timestamp_minutes(std::string_view s) {
    // Trim surrounding whitespace.
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    if (s.size() < 13) return std::nullopt;
    auto days = parse_date_days(s.substr(0, 10));
    if (!days) return std::nullopt;
    if (s[10] != 'T' && s[10] != ' ') return std::nullopt;
    unsigned hh;
    if (!parse_uint(s, 11, 2, hh) || hh > 23) return std::nullopt;
    unsigned mm = 0, ss = 0;
    std::size_t pos = 13;
    if (pos < s.size()) {
        if (s[pos] != ':') return std::nullopt;
        if (!parse_uint(s, pos + 1, 2, mm) || mm > 59) return std::nullopt;
        pos += 3;
        if (pos < s.size()) {
            if (s[pos] != ':') return std::nullopt;
            if (!parse_uint(s, pos + 1, 2, ss) || ss > 59) return std::nullopt;
            pos += 3;
        }
    }
    if (pos != s.size()) return std::nullopt;
    // Seconds are accepted but must be zero: all inputs are minute-resolution.
    if (ss != 0) return std::nullopt;
    return *days * 1440 + static_cast<MinuteIndex>(hh) * 60 + mm;
}

std::optional<HourIndex> parse_timestamp_hour(std::string_view s) {
    auto mins = parse_timestamp_minutes(s);
    if (!mins || *mins % 60 != 0) return std::nullopt;
    return *mins / 60;
}

std::string format_hour(HourIndex h) {
    const CivilDate c = civil_from_days(day_of_hour(h));
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:00", c.year, c.month, c.day,
                  hour_of_day(h));
    return buf;
}

std::string format_day(std::int64_t days) {
    const CivilDate c = civil_from_days(days);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", c.year, c.month, c.day);
    return buf;
}

}  // namespace loadshift::timeutil
