#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace loadshift::timeutil {

// Hours (respectively minutes) elapsed since 1970-01-01T00:00 civil time.
// All timestamps in the toolkit are civil local time; no UTC conversion is
// ever performed.
using HourIndex = std::int64_t;
using MinuteIndex = std::int64_t;
using DayIndex = std::int64_t;

struct CivilDate {
    int year;
    unsigned month;  // 1..12
    unsigned day;    // 1..31
};

// Days between 1970-01-01 and y-m-d (Howard Hinnant's algorithm).
std::int64_t days_from_civil(int year, unsigned month, unsigned day);
CivilDate civil_from_days(std::int64_t days) noexcept;

// 0 = Monday .. 6 = Sunday.
int weekday_from_days(std::int64_t days) noexcept;

inline std::int64_t day_of_hour(HourIndex h) noexcept {
    return h >= 0 ? h / 24 : (h - 23) / 24;
}
inline int hour_of_day(HourIndex h) noexcept {
    return static_cast<int>(h - day_of_hour(h) * 24);
}
inline int weekday_of_hour(HourIndex h) noexcept {
    return weekday_from_days(day_of_hour(h));
}
inline bool is_weekend_hour(HourIndex h) noexcept {
    return weekday_of_hour(h) >= 5;
}

// Parses "YYYY-MM-DD[T ]HH[:MM[:SS]]" into minutes since the epoch.
// Returns nullopt on any malformed or out-of-range component.
std::optional<MinuteIndex> parse_timestamp_minutes(std::string_view text);

// Parses a timestamp that must land exactly on an hour boundary.
std::optional<HourIndex> parse_timestamp_hour(std::string_view text);

// Parses "YYYY-MM-DD" into days since the epoch.
std::optional<std::int64_t> parse_date_days(std::string_view text);

std::string format_hour(HourIndex h);       // "YYYY-MM-DDTHH:00"
std::string format_day(std::int64_t days);  // "YYYY-MM-DD"

}  // namespace loadshift::timeutil
