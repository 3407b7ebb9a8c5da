#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "loadshift/timeutil.hpp"

namespace loadshift {

using timeutil::HourIndex;

// Hourly values indexed by civil hour. Hours are strictly increasing; a
// missing hour between front() and back() is a gap. Immutable once built.
class HourlySeries {
public:
    HourlySeries() = default;

    // Takes parallel vectors; hours must be strictly increasing.
    static HourlySeries from_sorted(std::vector<HourIndex> hours,
                                    std::vector<double> values);
    // Sorts by hour first; throws on duplicate hours.
    static HourlySeries from_pairs(std::vector<std::pair<HourIndex, double>> pairs);

    std::size_t size() const noexcept { return hours_.size(); }
    bool empty() const noexcept { return hours_.empty(); }
    std::span<const HourIndex> hours() const noexcept { return hours_; }
    std::span<const double> values() const noexcept { return values_; }
    HourIndex hour(std::size_t i) const { return hours_[i]; }
    double value(std::size_t i) const { return values_[i]; }

    std::optional<std::size_t> index_of(HourIndex h) const noexcept;
    std::optional<double> at(HourIndex h) const noexcept;
    bool contains(HourIndex h) const noexcept { return index_of(h).has_value(); }

    // True when hours i-(count-1) .. i are consecutive clock hours.
    bool window_complete(std::size_t i, std::size_t count) const noexcept {
        return i + 1 >= count &&
               hours_[i] - hours_[i + 1 - count] == static_cast<HourIndex>(count - 1);
    }

    // Keeps only hours present in `keep` (sorted ascending).
    HourlySeries restricted_to(std::span<const HourIndex> keep) const;
    // Removes all hours present in `drop` (sorted ascending).
    HourlySeries without(std::span<const HourIndex> drop) const;

    // Missing hours in [front, back].
    std::vector<HourIndex> gap_hours() const;

private:
    std::vector<HourIndex> hours_;
    std::vector<double> values_;
};

// Restricts both series to the intersection of their hour sets.
// Throws if the intersection is empty.
std::pair<HourlySeries, HourlySeries> align_series(const HourlySeries& cons,
                                                   const HourlySeries& temp);

}  // namespace loadshift
