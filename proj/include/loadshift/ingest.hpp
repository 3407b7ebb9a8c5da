#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "loadshift/csvio.hpp"
#include "loadshift/series.hpp"
#include "loadshift/timeutil.hpp"

namespace loadshift::ingest {

struct TemperatureObservation {
    timeutil::MinuteIndex minute;
    double value;  // °C
};

// One notification window. Hours covered are [start, start + duration_hours).
struct DREvent {
    timeutil::HourIndex start;
    int duration_hours;

    timeutil::HourIndex end() const { return start + duration_hours; }
};

struct UserFlags {
    bool has_solar = false;
    bool corrupt = false;  // set when any reading failed validation
};

struct MeterLoad {
    // Keyed by user_id; map keeps user iteration deterministic.
    std::map<std::string, HourlySeries> consumption;
    std::map<std::string, UserFlags> flags;
    csvio::ParseStats stats;
};

// Reads `user_id,timestamp,kwh`. Malformed rows are rejected with a line
// note. Negative, non-finite, or excessive (> excessive_kwh) consumption
// flags the row and marks the user corrupt. A duplicate (user, timestamp)
// pair is a hard error naming the user.
MeterLoad load_meter_csv(const std::filesystem::path& path, double excessive_kwh,
                         bool strict);

struct TemperatureLoad {
    std::vector<TemperatureObservation> obs;  // sorted by minute, stable
    csvio::ParseStats stats;
};

// Reads `timestamp,temp_c`; irregular spacing allowed, minute resolution.
TemperatureLoad load_temperature_csv(const std::filesystem::path& path, bool strict);

// Collapses observations to one value per clock hour.
//
// An hour containing observations gets their time-weighted mean: each
// observation holds from its own timestamp to the next observation in the
// hour (the first one also covers the span back to the hour start), so
// already-hourly input passes through exactly and a lone observation in an
// hour becomes that hour's value. An hour with no observation borrows the
// nearest earlier one, or failing that the nearest later one, if it lies
// within 3 hours; otherwise the hour is left as a gap.
HourlySeries resample_temperature(const std::vector<TemperatureObservation>& obs);

// Reads `user_id,start,duration_hours`, sorted per user by start.
// Malformed rows, duration < 1, and overlapping events are hard errors:
// a silently dropped event would poison the training partition.
std::map<std::string, std::vector<DREvent>> load_dr_events_csv(
    const std::filesystem::path& path, bool strict);

// Reads `user_id,has_solar`.
std::map<std::string, bool> load_flags_csv(const std::filesystem::path& path,
                                           bool strict);

struct RemovalEntry {
    std::string user_id;
    std::string reason;  // "solar" or "corrupt"
};

struct FilterResult {
    std::vector<std::string> kept;
    std::vector<RemovalEntry> removed;
};

// Drops users flagged solar or corrupt. Every user must have a flags entry.
FilterResult filter_users(const std::map<std::string, UserFlags>& flags,
                          const std::vector<std::string>& users);

// Expands events into the sorted set of distinct hours they cover.
std::vector<timeutil::HourIndex> event_hours(const std::vector<DREvent>& events);

}  // namespace loadshift::ingest
