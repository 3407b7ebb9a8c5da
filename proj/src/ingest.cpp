#include "loadshift/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace loadshift::ingest {

namespace {

using timeutil::HourIndex;
using timeutil::MinuteIndex;

HourIndex hour_of_minute(MinuteIndex m) {
    return m >= 0 ? m / 60 : (m - 59) / 60;
}

}  // namespace

MeterLoad load_meter_csv(const std::filesystem::path& path, double excessive_kwh,
                         bool strict) {
    MeterLoad out;
    std::map<std::string, std::vector<std::pair<HourIndex, double>>> raw;

    csvio::read_csv(
        path, {"user_id", "timestamp", "kwh"}, strict,
        [&](std::size_t line, const std::vector<std::string>& fields,
            const csvio::ColumnMap& col) {
            ++out.stats.rows_total;
            auto reject = [&](const std::string& why) {
                ++out.stats.rows_rejected;
                out.stats.issues.push_back({line, why});
            };
            const std::size_t need =
                *std::max_element(col.begin(), col.end()) + 1;
            if (fields.size() < need) {
                reject("short row");
                return;
            }
            const std::string& user = fields[col[0]];
            if (user.empty()) {
                reject("empty user_id");
                return;
            }
            const auto hour = timeutil::parse_timestamp_hour(fields[col[1]]);
            if (!hour) {
                reject("bad timestamp \"" + fields[col[1]] + "\"");
                return;
            }
            const auto kwh = csvio::parse_double(fields[col[2]]);
            if (!kwh) {
                reject("bad kwh \"" + fields[col[2]] + "\"");
                return;
            }
            if (!std::isfinite(*kwh) || *kwh < 0.0 || *kwh > excessive_kwh) {
                ++out.stats.rows_rejected;
                out.stats.issues.push_back(
                    {line, "corrupt reading for " + user + ": kwh=" + fields[col[2]]});
                out.flags[user].corrupt = true;
                out.consumption.try_emplace(user);  // user stays visible downstream
                return;
            }
            raw[user].emplace_back(*hour, *kwh);
            out.flags.try_emplace(user);
        });

    for (auto& [user, readings] : raw) {
        std::sort(readings.begin(), readings.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        for (std::size_t i = 1; i < readings.size(); ++i) {
            if (readings[i].first == readings[i - 1].first) {
                throw std::runtime_error(
                    path.string() + ": duplicate timestamp " +
                    timeutil::format_hour(readings[i].first) + " for user " + user);
            }
        }
        std::vector<HourIndex> hours;
        std::vector<double> values;
        hours.reserve(readings.size());
        values.reserve(readings.size());
        for (const auto& [h, v] : readings) {
            hours.push_back(h);
            values.push_back(v);
        }
        out.consumption[user] = HourlySeries::from_sorted(std::move(hours),
                                                          std::move(values));
    }
    return out;
}

TemperatureLoad load_temperature_csv(const std::filesystem::path& path, bool strict) {
    TemperatureLoad out;
    csvio::read_csv(
        path, {"timestamp", "temp_c"}, strict,
        [&](std::size_t line, const std::vector<std::string>& fields,
            const csvio::ColumnMap& col) {
            ++out.stats.rows_total;
            auto reject = [&](const std::string& why) {
                ++out.stats.rows_rejected;
                out.stats.issues.push_back({line, why});
            };
            const std::size_t need =
                *std::max_element(col.begin(), col.end()) + 1;
            if (fields.size() < need) {
                reject("short row");
                return;
            }
            const auto minute = timeutil::parse_timestamp_minutes(fields[col[0]]);
            if (!minute) {
                reject("bad timestamp \"" + fields[col[0]] + "\"");
                return;
            }
            const auto temp = csvio::parse_double(fields[col[1]]);
            if (!temp || !std::isfinite(*temp)) {
                reject("bad temp_c \"" + fields[col[1]] + "\"");
                return;
            }
            out.obs.push_back({*minute, *temp});
        });
    // Stable: observations sharing a minute keep file order (the later one
    // wins the zero-order-hold span).
    std::stable_sort(out.obs.begin(), out.obs.end(),
                     [](const TemperatureObservation& a,
                        const TemperatureObservation& b) { return a.minute < b.minute; });
    return out;
}

HourlySeries resample_temperature(const std::vector<TemperatureObservation>& obs) {
    if (obs.empty()) return {};
    for (std::size_t i = 1; i < obs.size(); ++i) {
        if (obs[i].minute < obs[i - 1].minute) {
            throw std::logic_error("resample_temperature: observations not sorted");
        }
    }

    const HourIndex h_first = hour_of_minute(obs.front().minute);
    const HourIndex h_last = hour_of_minute(obs.back().minute);
    std::vector<HourIndex> hours;
    std::vector<double> values;
    hours.reserve(static_cast<std::size_t>(h_last - h_first + 1));
    values.reserve(hours.capacity());

    std::size_t lo = 0;  // first observation with minute >= hour start
    for (HourIndex h = h_first; h <= h_last; ++h) {
        const MinuteIndex m0 = h * 60;
        const MinuteIndex m1 = m0 + 60;
        while (lo < obs.size() && obs[lo].minute < m0) ++lo;
        std::size_t hi = lo;
        while (hi < obs.size() && obs[hi].minute < m1) ++hi;

        if (hi > lo) {
            double acc = 0.0;
            for (std::size_t i = lo; i < hi; ++i) {
                const MinuteIndex from = (i == lo) ? m0 : obs[i].minute;
                const MinuteIndex to = (i + 1 < hi) ? obs[i + 1].minute : m1;
                acc += static_cast<double>(to - from) * obs[i].value;
            }
            hours.push_back(h);
            values.push_back(acc / 60.0);
        } else if (lo > 0 && m0 - obs[lo - 1].minute <= 180) {
            hours.push_back(h);
            values.push_back(obs[lo - 1].value);
        } else if (lo < obs.size() && obs[lo].minute - m1 <= 180) {
            hours.push_back(h);
            values.push_back(obs[lo].value);
        }
        // else: gap, hour omitted
    }
    return HourlySeries::from_sorted(std::move(hours), std::move(values));
}

std::map<std::string, std::vector<DREvent>> load_dr_events_csv(
    const std::filesystem::path& path, bool strict) {
    std::map<std::string, std::vector<DREvent>> out;
    csvio::read_csv(
        path, {"user_id", "start", "duration_hours"}, strict,
        [&](std::size_t line, const std::vector<std::string>& fields,
            const csvio::ColumnMap& col) {
            auto fail = [&](const std::string& why) {
                throw std::runtime_error(path.string() + ":" + std::to_string(line) +
                                         ": " + why);
            };
            const std::size_t need =
                *std::max_element(col.begin(), col.end()) + 1;
            if (fields.size() < need) fail("short row");
            const std::string& user = fields[col[0]];
            if (user.empty()) fail("empty user_id");
            const auto start = timeutil::parse_timestamp_hour(fields[col[1]]);
            if (!start) fail("bad start \"" + fields[col[1]] + "\"");
            const auto dur = csvio::parse_int(fields[col[2]]);
            if (!dur || *dur < 1) fail("bad duration_hours \"" + fields[col[2]] + "\"");
            out[user].push_back({*start, static_cast<int>(*dur)});
        });

    for (auto& [user, events] : out) {
        std::sort(events.begin(), events.end(),
                  [](const DREvent& a, const DREvent& b) { return a.start < b.start; });
        for (std::size_t i = 1; i < events.size(); ++i) {
            if (events[i].start < events[i - 1].end()) {
                throw std::runtime_error(path.string() + ": overlapping events for user " +
                                         user + " at " +
                                         timeutil::format_hour(events[i].start));
            }
        }
    }
    return out;
}

std::map<std::string, bool> load_flags_csv(const std::filesystem::path& path,
                                           bool strict) {
    std::map<std::string, bool> out;
    csvio::read_csv(
        path, {"user_id", "has_solar"}, strict,
        [&](std::size_t line, const std::vector<std::string>& fields,
            const csvio::ColumnMap& col) {
            auto fail = [&](const std::string& why) {
                throw std::runtime_error(path.string() + ":" + std::to_string(line) +
                                         ": " + why);
            };
            const std::size_t need =
                *std::max_element(col.begin(), col.end()) + 1;
            if (fields.size() < need) fail("short row");
            const std::string& user = fields[col[0]];
            if (user.empty()) fail("empty user_id");
            const std::string& v = fields[col[1]];
            bool solar = false;
            if (v == "1" || v == "true") {
                solar = true;
            } else if (v == "0" || v == "false") {
                solar = false;
            } else {
                fail("bad has_solar \"" + v + "\"");
            }
            out[user] = solar;
        });
    return out;
}

FilterResult filter_users(const std::map<std::string, UserFlags>& flags,
                          const std::vector<std::string>& users) {
    FilterResult out;
    for (const auto& user : users) {
        auto it = flags.find(user);
        if (it == flags.end()) {
            throw std::runtime_error("no flags entry for user " + user);
        }
        if (it->second.has_solar) {
            out.removed.push_back({user, "solar"});
        } else if (it->second.corrupt) {
            out.removed.push_back({user, "corrupt"});
        } else {
            out.kept.push_back(user);
        }
    }
    return out;
}

std::vector<timeutil::HourIndex> event_hours(const std::vector<DREvent>& events) {
    std::set<HourIndex> hours;
    for (const auto& ev : events) {
        for (HourIndex h = ev.start; h < ev.end(); ++h) hours.insert(h);
    }
    return {hours.begin(), hours.end()};
}

}  // namespace loadshift::ingest
