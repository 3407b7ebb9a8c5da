#include "loadshift/series.hpp"

#include <algorithm>
#include <stdexcept>

#include "loadshift/timeutil.hpp"

namespace loadshift {

HourlySeries HourlySeries::from_sorted(std::vector<HourIndex> hours,
                                       std::vector<double> values) {
    if (hours.size() != values.size())
        throw std::invalid_argument("HourlySeries: hours/values length mismatch");
    for (std::size_t i = 1; i < hours.size(); ++i)
        if (hours[i] <= hours[i - 1])
            throw std::invalid_argument("HourlySeries: hours not strictly increasing");
    HourlySeries s;
    s.hours_ = std::move(hours);
    s.values_ = std::move(values);
    return s;
}

HourlySeries HourlySeries::from_pairs(std::vector<std::pair<HourIndex, double>> pairs) {
    std::sort(pairs.begin(), pairs.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<HourIndex> hours;
    std::vector<double> values;
    hours.reserve(pairs.size());
    values.reserve(pairs.size());
    for (const auto& [h, v] : pairs) {
        if (!hours.empty() && hours.back() == h)
            throw std::invalid_argument("HourlySeries: duplicate hour " +
                                        timeutil::format_hour(h));
        hours.push_back(h);
        values.push_back(v);
    }
    return from_sorted(std::move(hours), std::move(values));
}

std::optional<std::size_t> HourlySeries::index_of(HourIndex h) const noexcept {
    auto it = std::lower_bound(hours_.begin(), hours_.end(), h);
    if (it == hours_.end() || *it != h) return std::nullopt;
    return static_cast<std::size_t>(it - hours_.begin());
}

std::optional<double> HourlySeries::at(HourIndex h) const noexcept {
    auto i = index_of(h);
    if (!i) return std::nullopt;
    return values_[*i];
}

HourlySeries HourlySeries::restricted_to(std::span<const HourIndex> keep) const {
    std::vector<HourIndex> hours;
    std::vector<double> values;
    std::size_t i = 0, j = 0;
    while (i < hours_.size() && j < keep.size()) {
        if (hours_[i] < keep[j]) {
            ++i;
        } else if (keep[j] < hours_[i]) {
            ++j;
        } else {
            hours.push_back(hours_[i]);
            values.push_back(values_[i]);
            ++i;
            ++j;
        }
    }
    return from_sorted(std::move(hours), std::move(values));
}

HourlySeries HourlySeries::without(std::span<const HourIndex> drop) const {
    std::vector<HourIndex> hours;
    std::vector<double> values;
    hours.reserve(hours_.size());
    values.reserve(values_.size());
    std::size_t j = 0;
    for (std::size_t i = 0; i < hours_.size(); ++i) {
        while (j < drop.size() && drop[j] < hours_[i]) ++j;
        if (j < drop.size() && drop[j] == hours_[i]) continue;
        hours.push_back(hours_[i]);
        values.push_back(values_[i]);
    }
    return from_sorted(std::move(hours), std::move(values));
}

std::vector<HourIndex> HourlySeries::gap_hours() const {
    std::vector<HourIndex> gaps;
    for (std::size_t i = 1; i < hours_.size(); ++i)
        for (HourIndex h = hours_[i - 1] + 1; h < hours_[i]; ++h) gaps.push_back(h);
    return gaps;
}

std::pair<HourlySeries, HourlySeries> align_series(const HourlySeries& cons,
                                                   const HourlySeries& temp) {
    auto a = cons.restricted_to(temp.hours());
    auto b = temp.restricted_to(cons.hours());
    if (a.empty())
        throw std::invalid_argument(
            "align_series: consumption and temperature share no hours");
    return {std::move(a), std::move(b)};
}

}  // namespace loadshift
