#include "loadshift/baseline.hpp"

#include <map>

namespace loadshift::forecast {

namespace {

using timeutil::HourIndex;

struct PoolIndex {
    std::set<std::int64_t> event_days;
    const BaselineConfig* cfg;

    bool weekend_like(std::int64_t day) const {
        return timeutil::weekday_from_days(day) >= 5 || cfg->holidays.count(day) > 0;
    }
};

PoolIndex make_index(const std::vector<ingest::DREvent>& events,
                     const BaselineConfig& cfg) {
    PoolIndex idx;
    idx.cfg = &cfg;
    for (const auto& ev : events) {
        for (HourIndex h = ev.start; h < ev.end(); ++h) {
            idx.event_days.insert(timeutil::day_of_hour(h));
        }
    }
    return idx;
}

std::optional<double> raw_baseline(const HourlySeries& history, const PoolIndex& idx,
                                   HourIndex target) {
    const std::int64_t target_day = timeutil::day_of_hour(target);
    const int clock_hour = timeutil::hour_of_day(target);
    const bool want_weekend = idx.weekend_like(target_day);
    const int need = want_weekend ? idx.cfg->weekend_pool : idx.cfg->weekday_pool;

    double sum = 0.0;
    int found = 0;
    for (std::int64_t day = target_day - 1;
         day > target_day - 1 - idx.cfg->scan_back_days && found < need; --day) {
        if (idx.weekend_like(day) != want_weekend) continue;
        if (idx.event_days.count(day)) continue;
        const auto v = history.at(day * 24 + clock_hour);
        if (!v) continue;
        sum += *v;
        ++found;
    }
    if (found < need) return std::nullopt;
    return sum / static_cast<double>(need);
}

}  // namespace

std::optional<double> iso_raw_baseline(const HourlySeries& history,
                                       const std::vector<ingest::DREvent>& events,
                                       HourIndex target, const BaselineConfig& cfg) {
    return raw_baseline(history, make_index(events, cfg), target);
}

BaselineResult iso_baseline(const HourlySeries& history,
                            const std::vector<ingest::DREvent>& events,
                            std::span<const HourIndex> target_hours,
                            const BaselineConfig& cfg) {
    const PoolIndex idx = make_index(events, cfg);

    // Day -> start of its first event; the LPA window hangs off that.
    std::map<std::int64_t, HourIndex> first_event_start;
    for (const auto& ev : events) {
        for (HourIndex h = ev.start; h < ev.end(); ++h) {
            const std::int64_t day = timeutil::day_of_hour(h);
            auto it = first_event_start.find(day);
            if (it == first_event_start.end() || ev.start < it->second) {
                first_event_start[day] = ev.start;
            }
        }
    }

    std::map<std::int64_t, double> day_ratio;
    auto ratio_for_day = [&](std::int64_t day) {
        auto cached = day_ratio.find(day);
        if (cached != day_ratio.end()) return cached->second;
        double ratio = 1.0;
        auto ev = first_event_start.find(day);
        if (ev != first_event_start.end()) {
            double obs_sum = 0.0, base_sum = 0.0;
            int n = 0;
            for (HourIndex h = ev->second - 4; h <= ev->second - 2; ++h) {
                const auto obs = history.at(h);
                if (!obs) continue;
                const auto base = raw_baseline(history, idx, h);
                if (!base) continue;
                obs_sum += *obs;
                base_sum += *base;
                ++n;
            }
            if (n > 0 && base_sum > 0.0) {
                ratio = (obs_sum / n) / (base_sum / n);
            }
        }
        day_ratio[day] = ratio;
        return ratio;
    };

    BaselineResult out;
    out.hours.assign(target_hours.begin(), target_hours.end());
    out.raw.resize(target_hours.size());
    out.adjusted.resize(target_hours.size());
    for (std::size_t i = 0; i < target_hours.size(); ++i) {
        const HourIndex h = target_hours[i];
        out.raw[i] = raw_baseline(history, idx, h);
        if (!out.raw[i]) continue;
        const std::int64_t day = timeutil::day_of_hour(h);
        if (first_event_start.count(day)) {
            out.adjusted[i] = *out.raw[i] * ratio_for_day(day);
        } else {
            out.adjusted[i] = out.raw[i];
        }
    }
    return out;
}

}  // namespace loadshift::forecast
