#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "loadshift/ingest.hpp"
#include "loadshift/series.hpp"

namespace loadshift::forecast {

struct BaselineConfig {
    std::set<std::int64_t> holidays;  // day indices; holidays pool with weekends
    int weekday_pool = 10;
    int weekend_pool = 4;
    int scan_back_days = 60;  // give up beyond this horizon
};

struct BaselineResult {
    std::vector<timeutil::HourIndex> hours;
    std::vector<std::optional<double>> raw;       // 10-in-10 pool mean
    std::vector<std::optional<double>> adjusted;  // raw x event-day LPA ratio
};

// 10-in-10 baseline with Load Point Adjustment. The raw baseline for a
// target hour is the mean of the same clock hour over the last 10 non-event
// weekdays (4 non-event weekend-or-holiday days for weekend/holiday targets)
// that carry a reading at that clock hour, scanning back at most
// scan_back_days; fewer pool days than required marks the hour unavailable.
//
// On days containing an event, every hour's baseline is scaled by one ratio:
// mean observed over the three hours whose span ends one hour before the
// day's first event (start-4, start-3, start-2), divided by the mean raw
// baseline over those same hours. Hours where either side is missing drop
// out of both means; an empty window or non-positive denominator gives 1.
BaselineResult iso_baseline(const HourlySeries& history,
                            const std::vector<ingest::DREvent>& events,
                            std::span<const timeutil::HourIndex> target_hours,
                            const BaselineConfig& cfg);

// Raw pool mean for one target hour (no adjustment); exposed for tests.
std::optional<double> iso_raw_baseline(const HourlySeries& history,
                                       const std::vector<ingest::DREvent>& events,
                                       timeutil::HourIndex target,
                                       const BaselineConfig& cfg);

}  // namespace loadshift::forecast
