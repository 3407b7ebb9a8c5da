#include "doctest.h"

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "helpers.hpp"
#include "loadshift/segment.hpp"
#include "loadshift/util.hpp"

using namespace loadshift;
using namespace loadshift::segment;
using timeutil::HourIndex;
using timeutil::days_from_civil;

namespace {

const std::int64_t kMonday = days_from_civil(2016, 1, 4);

// Consumption over `n_days` starting at kMonday with value(day, hour).
HourlySeries consumption(int n_days,
                         const std::function<double(int, int)>& value) {
    std::vector<std::pair<HourIndex, double>> pairs;
    for (int d = 0; d < n_days; ++d)
        for (int h = 0; h < 24; ++h)
            pairs.emplace_back((kMonday + d) * 24 + h, value(d, h));
    return HourlySeries::from_pairs(std::move(pairs));
}

LoadShape shape_of(const Shape& values) {
    LoadShape s;
    s.values = values;
    return s;
}

Shape unit_bump(int peak, double spread) {
    Shape s{};
    double total = 0.0;
    for (int h = 0; h < 24; ++h) {
        const double d = std::min(std::abs(h - peak), 24 - std::abs(h - peak));
        s[h] = std::exp(-d * d / (2.0 * spread * spread));
        total += s[h];
    }
    for (auto& v : s) v /= total;
    return s;
}

}  // namespace

TEST_CASE("per-day shapes normalize complete weekdays") {
    SUBCASE("flat day becomes the uniform shape") {
        const auto shapes = per_day_shapes(consumption(1, [](int, int) { return 3.0; }));
        REQUIRE(shapes.size() == 1);
        for (double v : shapes[0]) CHECK(v == doctest::Approx(1.0 / 24));
    }
    SUBCASE("single-hour spike concentrates the mass") {
        const auto shapes = per_day_shapes(
            consumption(1, [](int, int h) { return h == 18 ? 5.0 : 0.0; }));
        REQUIRE(shapes.size() == 1);
        CHECK(shapes[0][18] == 1.0);
        CHECK(shapes[0][0] == 0.0);
    }
    SUBCASE("weekends and incomplete days are skipped") {
        // 7 days: 5 weekdays + Sat/Sun.
        const auto shapes = per_day_shapes(consumption(7, [](int, int) { return 1.0; }));
        CHECK(shapes.size() == 5);

        // Drop one hour of Wednesday: that day no longer counts.
        std::vector<std::pair<HourIndex, double>> pairs;
        for (int d = 0; d < 7; ++d)
            for (int h = 0; h < 24; ++h) {
                if (d == 2 && h == 12) continue;
                pairs.emplace_back((kMonday + d) * 24 + h, 1.0);
            }
        const auto partial =
            per_day_shapes(HourlySeries::from_pairs(std::move(pairs)));
        CHECK(partial.size() == 4);
    }
    SUBCASE("zero-total days are skipped") {
        const auto shapes = per_day_shapes(
            consumption(2, [](int d, int) { return d == 0 ? 0.0 : 2.0; }));
        CHECK(shapes.size() == 1);
    }
    SUBCASE("raw profiles keep the kWh scale") {
        const auto raw = per_day_profiles_raw(
            consumption(1, [](int, int h) { return h == 6 ? 4.0 : 1.0; }));
        REQUIRE(raw.size() == 1);
        CHECK(raw[0][6] == 4.0);
        CHECK(raw[0][7] == 1.0);
    }
}

TEST_CASE("daily_shapes averages five-day groups") {
    SUBCASE("five identical weekdays collapse to one shape") {
        const auto shapes = daily_shapes(consumption(5, [](int, int) { return 2.0; }));
        REQUIRE(shapes.size() == 1);
        for (double v : shapes[0].values) CHECK(v == doctest::Approx(1.0 / 24));
        CHECK(shapes[0].first_day == kMonday);
        CHECK(shapes[0].last_day == kMonday + 4);
    }
    SUBCASE("fewer than five weekdays yields nothing") {
        CHECK(daily_shapes(consumption(4, [](int, int) { return 1.0; })).empty());
    }
    SUBCASE("a trailing partial group is dropped") {
        // 16 days = 12 weekdays: two full groups, two leftovers.
        const auto shapes = daily_shapes(consumption(16, [](int, int) { return 1.0; }));
        CHECK(shapes.size() == 2);
    }
    SUBCASE("group averages renormalize to unit sum") {
        const auto shapes = daily_shapes(consumption(5, [](int d, int h) {
            return h == (18 + d) % 24 ? 3.0 : 0.5;
        }));
        REQUIRE(shapes.size() == 1);
        double total = 0.0;
        for (double v : shapes[0].values) total += v;
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("kmeans clusters well-separated shape families") {
    std::vector<LoadShape> shapes;
    std::mt19937_64 rng(5);
    const Shape morning = unit_bump(7, 2.0);
    const Shape evening = unit_bump(19, 2.0);
    for (int i = 0; i < 30; ++i) {
        Shape base = i % 2 == 0 ? morning : evening;
        double total = 0.0;
        for (auto& v : base) {
            v = std::max(0.0, v + 0.002 * util::normal01(rng));
            total += v;
        }
        for (auto& v : base) v /= total;
        shapes.push_back(shape_of(base));
    }

    KmeansConfig cfg;
    cfg.k = 2;
    cfg.seed = 11;
    const ClusterModel m = kmeans(shapes, cfg);
    REQUIRE(m.k == 2);
    REQUIRE(m.assignments.size() == 30);
    // Parity determines the family; clustering must recover it.
    for (int i = 2; i < 30; ++i)
        CHECK(m.assignments[i] == m.assignments[i % 2]);
    CHECK(m.assignments[0] != m.assignments[1]);

    SUBCASE("squared error never increases between iterations") {
        REQUIRE(!m.se_history.empty());
        for (std::size_t i = 1; i < m.se_history.size(); ++i)
            CHECK(m.se_history[i] <= m.se_history[i - 1] + 1e-12);
    }
    SUBCASE("repeat runs are identical") {
        const ClusterModel m2 = kmeans(shapes, cfg);
        CHECK(m2.assignments == m.assignments);
        CHECK(m2.se == m.se);
    }
}

TEST_CASE("kmeans edge geometries") {
    std::vector<LoadShape> shapes;
    std::mt19937_64 rng(6);
    for (int i = 0; i < 12; ++i) {
        Shape s{};
        double total = 0.0;
        for (auto& v : s) {
            v = 1.0 + 0.1 * util::uniform01(rng);
            total += v;
        }
        for (auto& v : s) v /= total;
        shapes.push_back(shape_of(s));
    }

    SUBCASE("k=1 centroid is the elementwise mean") {
        KmeansConfig cfg;
        cfg.k = 1;
        cfg.seed = 3;
        const ClusterModel m = kmeans(shapes, cfg);
        for (int h = 0; h < 24; ++h) {
            double mean = 0.0;
            for (const auto& s : shapes) mean += s.values[h];
            mean /= static_cast<double>(shapes.size());
            CHECK(m.centroids[0][h] == doctest::Approx(mean).epsilon(1e-9));
        }
        CHECK(m.se >= 0.0);
    }
    SUBCASE("k=n puts every shape in its own cluster") {
        KmeansConfig cfg;
        cfg.k = 12;
        cfg.seed = 3;
        const ClusterModel m = kmeans(shapes, cfg);
        std::vector<bool> used(12, false);
        for (int a : m.assignments) {
            CHECK(!used[static_cast<std::size_t>(a)]);
            used[static_cast<std::size_t>(a)] = true;
        }
        CHECK(m.se == doctest::Approx(0.0).epsilon(1e-18));
    }
    SUBCASE("k above the population is rejected") {
        KmeansConfig cfg;
        cfg.k = 13;
        CHECK_THROWS(kmeans(shapes, cfg));
    }
}

TEST_CASE("entropy of membership distributions") {
    SUBCASE("single cluster carries no information") {
        const std::vector<int> a{0, 0, 0, 0};
        CHECK(entropy(a, 4) == 0.0);
    }
    SUBCASE("uniform membership maxes out at log k") {
        const std::vector<int> a{0, 1, 2, 3};
        CHECK(entropy(a, 4) == doctest::Approx(std::log(4.0)));
    }
    SUBCASE("half and half") {
        const std::vector<int> a{0, 1, 0, 1};
        CHECK(entropy(a, 2) == doctest::Approx(std::log(2.0)));
    }
    SUBCASE("bounds hold for arbitrary assignments") {
        std::mt19937_64 rng(77);
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<int> a(40);
            for (auto& v : a)
                v = static_cast<int>(util::uniform01(rng) * 6.0);
            const double e = entropy(a, 6);
            CHECK(e >= 0.0);
            CHECK(e <= std::log(6.0) + 1e-12);
        }
    }
}

TEST_CASE("hourly_std sums per-hour dispersion") {
    SUBCASE("identical days have zero dispersion") {
        CHECK(hourly_std(consumption(5, [](int, int) { return 2.0; })) == 0.0);
    }
    SUBCASE("two days differing in one hour") {
        // Shapes: day 0 puts 0.1 at hour 1, day 1 puts 0.3; the remaining
        // mass spreads evenly, so every other hour also moves.
        const auto cons = consumption(2, [](int d, int h) {
            if (h == 1) return d == 0 ? 10.0 : 30.0;
            return d == 0 ? (90.0 / 23.0) : (70.0 / 23.0);
        });
        // Hour 1 std: mean 0.2, deviations 0.1 -> 0.1. Other 23 hours:
        // each contributes 0.1/23. Total: 0.1 + 23*(0.1/23) = 0.2.
        CHECK(hourly_std(cons) == doctest::Approx(0.2).epsilon(1e-12));
    }
    SUBCASE("scaling both days leaves normalized dispersion unchanged") {
        const auto base = consumption(2, [](int d, int h) {
            return h == (d == 0 ? 7 : 19) ? 5.0 : 1.0;
        });
        const auto scaled = consumption(2, [](int d, int h) {
            return 10.0 * (h == (d == 0 ? 7 : 19) ? 5.0 : 1.0);
        });
        CHECK(hourly_std(base) == doctest::Approx(hourly_std(scaled)));
        // The raw variant does scale.
        CHECK(hourly_std(scaled, true) ==
              doctest::Approx(10.0 * hourly_std(base, true)));
    }
}

TEST_CASE("percentile_bins ranks by entropy with stable ties") {
    auto score = [](const std::string& id, double e) {
        VariabilityScore s;
        s.user_id = id;
        s.entropy_by_k[12] = e;
        return s;
    };

    SUBCASE("100 users into 10 equal bins") {
        std::vector<VariabilityScore> scores;
        for (int i = 0; i < 100; ++i)
            scores.push_back(score("u" + std::to_string(i), (i * 37) % 100));
        const auto bins = percentile_bins(scores, 10, 12);
        REQUIRE(bins.size() == 10);
        double prev_max = -1.0;
        for (const auto& bin : bins) {
            CHECK(bin.size() == 10);
            double lo = 1e9, hi = -1e9;
            for (std::size_t idx : bin) {
                lo = std::min(lo, scores[idx].entropy_by_k.at(12));
                hi = std::max(hi, scores[idx].entropy_by_k.at(12));
            }
            CHECK(lo > prev_max);  // bins are sorted ranges of entropy
            prev_max = hi;
        }
    }
    SUBCASE("remainder spreads over the leading bins") {
        std::vector<VariabilityScore> scores;
        for (int i = 0; i < 11; ++i)
            scores.push_back(score("u" + std::to_string(i), i));
        const auto bins = percentile_bins(scores, 3, 12);
        REQUIRE(bins.size() == 3);
        CHECK(bins[0].size() == 4);
        CHECK(bins[1].size() == 4);
        CHECK(bins[2].size() == 3);
    }
    SUBCASE("entropy ties order by user id") {
        std::vector<VariabilityScore> scores;
        scores.push_back(score("b", 1.0));
        scores.push_back(score("a", 1.0));
        scores.push_back(score("c", 0.5));
        scores.push_back(score("d", 2.0));
        const auto bins = percentile_bins(scores, 2, 12);
        REQUIRE(bins.size() == 2);
        // Sorted order: c, a, b, d.
        CHECK(bins[0] == std::vector<std::size_t>{2, 1});
        CHECK(bins[1] == std::vector<std::size_t>{0, 3});
    }
    SUBCASE("more bins than users is an error") {
        std::vector<VariabilityScore> scores;
        for (int i = 0; i < 3; ++i)
            scores.push_back(score("u" + std::to_string(i), i));
        CHECK_THROWS(percentile_bins(scores, 5, 12));
    }
    SUBCASE("missing entropy for the requested k is an error") {
        std::vector<VariabilityScore> scores{score("a", 1.0)};
        CHECK_THROWS(percentile_bins(scores, 1, 99));
    }
}
