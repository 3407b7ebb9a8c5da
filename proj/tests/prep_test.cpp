#include "doctest.h"

#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "helpers.hpp"
#include "loadshift/prep.hpp"
#include "loadshift/util.hpp"

using namespace loadshift;
using namespace loadshift::prep;
using ingest::DREvent;
using timeutil::HourIndex;
using timeutil::days_from_civil;

namespace {

// Deterministic gap-free hourly series of length n starting at `start`.
HourlySeries synthetic_series(HourIndex start, std::size_t n, std::uint64_t seed,
                              double level = 5.0, double noise = 0.5) {
    std::vector<double> values(n);
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const int hod = timeutil::hour_of_day(start + static_cast<HourIndex>(i));
        values[i] = level + std::sin(2.0 * M_PI * hod / 24.0) +
                    noise * util::normal01(rng);
    }
    return testutil::make_series(start, values);
}

}  // namespace

TEST_CASE("standardize computes training moments") {
    const HourlySeries s = testutil::make_series(0, {1.0, 2.0, 3.0});
    const auto [z, p] = standardize(s);
    CHECK(p.mean == 2.0);
    CHECK(p.std == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));
    CHECK(z.value(1) == 0.0);
    CHECK(z.value(0) == doctest::Approx(-1.0 / std::sqrt(2.0 / 3.0)));
    CHECK(z.value(2) == -z.value(0));

    SUBCASE("constant series has no scale") {
        CHECK_THROWS_AS(standardize(testutil::make_series(0, {4.0, 4.0, 4.0})),
                        std::runtime_error);
    }
    SUBCASE("supplied params are applied unchanged") {
        const auto [z2, p2] = standardize(s, StandardizationParams{10.0, 2.0});
        CHECK(p2.mean == 10.0);
        CHECK(z2.value(0) == -4.5);
        CHECK(z2.value(2) == -3.5);
    }
    SUBCASE("round trip restores values") {
        for (std::size_t i = 0; i < s.size(); ++i) {
            CHECK(invert_standardization(z.value(i), p) ==
                  doctest::Approx(s.value(i)).epsilon(1e-12));
        }
    }
}

TEST_CASE("spillover removal excludes trailing hours") {
    const HourlySeries day = testutil::make_series(
        0, std::vector<double>(48, 1.0));  // two full days from hour 0

    SUBCASE("single event drops the event hour and the next eight") {
        const std::vector<DREvent> events{{14, 1}};
        const SpilloverResult r = remove_spillover(day, events, 8);
        CHECK(r.dr_hours == std::vector<HourIndex>{14});
        CHECK(r.removed ==
              std::vector<HourIndex>{15, 16, 17, 18, 19, 20, 21, 22});
        CHECK(r.training.size() == 48 - 9);
        CHECK(!r.training.contains(14));
        CHECK(!r.training.contains(22));
        CHECK(r.training.contains(23));
    }
    SUBCASE("adjacent events extend the window without double counting") {
        const std::vector<DREvent> events{{14, 1}, {15, 1}};
        const SpilloverResult r = remove_spillover(day, events, 8);
        CHECK(r.dr_hours == std::vector<HourIndex>{14, 15});
        CHECK(r.removed ==
              std::vector<HourIndex>{16, 17, 18, 19, 20, 21, 22, 23});
    }
    SUBCASE("no events leaves the series intact") {
        const SpilloverResult r = remove_spillover(day, {}, 8);
        CHECK(r.dr_hours.empty());
        CHECK(r.removed.empty());
        CHECK(r.training.size() == day.size());
    }
}

TEST_CASE("feature schema is fixed") {
    CHECK(kNumFeatures == 58);
    const auto schema = feature_schema();
    CHECK(schema.size() == 58u);
    CHECK(schema_hash() != 0);

    const HourIndex monday = days_from_civil(2016, 1, 4) * 24;
    const HourIndex saturday = days_from_civil(2016, 1, 9) * 24;
    CHECK(onehot_block_index(monday) == 0);
    CHECK(onehot_block_index(monday + 23) == 23);
    CHECK(onehot_block_index(saturday) == 24);
    CHECK(onehot_block_index(saturday + 24 + 23) == 47);  // Sunday 23:00
}

TEST_CASE("build_features partitions rows and fills lag columns") {
    const HourIndex start = days_from_civil(2016, 1, 4) * 24;  // Monday
    const std::size_t n = 24 * 30;
    const HourlySeries cons = synthetic_series(start, n, 11);
    const HourlySeries temp = synthetic_series(start, n, 22, 15.0, 1.0);
    const HourIndex ev_start = start + 10 * 24 + 14;
    const std::vector<DREvent> events{{ev_start, 2}};

    const FeatureBuildResult r = build_features(cons, temp, events, 8, 10, 1);
    REQUIRE(r.features.has_value());
    const FeatureSet& fs = *r.features;

    CHECK(fs.X0.cols() == 58);
    CHECK(fs.X1.cols() == 58);
    CHECK(fs.column_schema == feature_schema());
    CHECK(static_cast<std::size_t>(fs.X0.rows()) == fs.hours0.size());
    CHECK(fs.X1.rows() == 2);  // one row per event hour
    CHECK(fs.hours1 == std::vector<HourIndex>{ev_start, ev_start + 1});

    SUBCASE("lag columns copy the source series") {
        for (int row : {0, 1}) {
            const HourIndex h = fs.hours1[static_cast<std::size_t>(row)];
            CHECK(fs.Y1(row) == cons.at(h));
            for (int l = 1; l <= kNumLags; ++l) {
                CHECK(fs.X1(row, l - 1) == cons.at(h - l));
                CHECK(fs.X1(row, kNumLags + l - 1) == temp.at(h - l));
            }
        }
        const HourIndex h0 = fs.hours0[0];
        CHECK(fs.Y0(0) == cons.at(h0));
        CHECK(fs.X0(0, 0) == cons.at(h0 - 1));
        CHECK(fs.X0(0, 9) == temp.at(h0 - 5));
    }
    SUBCASE("one-hot block has exactly one hot entry in the right slot") {
        for (Eigen::Index i = 0; i < fs.X0.rows(); ++i) {
            double sum = 0.0;
            for (int c = 10; c < 58; ++c) sum += fs.X0(i, c);
            CHECK(sum == 1.0);
            const int hot = onehot_block_index(fs.hours0[static_cast<std::size_t>(i)]);
            CHECK(fs.X0(i, 10 + hot) == 1.0);
        }
    }
    SUBCASE("training rows avoid event and spillover influence") {
        const auto spill = spillover_hours_set(events, 8);
        std::set<HourIndex> tainted(spill.begin(), spill.end());
        tainted.insert(ev_start);
        tainted.insert(ev_start + 1);
        std::set<HourIndex> dr(fs.hours1.begin(), fs.hours1.end());
        for (const HourIndex h : fs.hours0) {
            CHECK(!dr.count(h));
            for (HourIndex l = 0; l <= kNumLags; ++l)
                CHECK(!tainted.count(h - l));
        }
        // First possible target is the sixth hour of the series.
        CHECK(fs.hours0.front() >= start + kNumLags);
    }
    SUBCASE("shifting everything by one week reproduces the matrices") {
        auto shift = [](const HourlySeries& s, HourIndex by) {
            std::vector<std::pair<HourIndex, double>> pairs;
            for (std::size_t i = 0; i < s.size(); ++i)
                pairs.emplace_back(s.hour(i) + by, s.value(i));
            return HourlySeries::from_pairs(std::move(pairs));
        };
        const HourIndex week = 168;
        const std::vector<DREvent> shifted_events{{ev_start + week, 2}};
        const FeatureBuildResult r2 =
            build_features(shift(cons, week), shift(temp, week), shifted_events,
                           8, 10, 1);
        REQUIRE(r2.features.has_value());
        CHECK(r2.features->X0 == fs.X0);
        CHECK(r2.features->Y0 == fs.Y0);
        CHECK(r2.features->X1 == fs.X1);
        CHECK(r2.features->hours0.front() == fs.hours0.front() + week);
    }
}

TEST_CASE("build_features skips undersized users with a reason") {
    const HourIndex start = days_from_civil(2016, 1, 4) * 24;
    const HourlySeries cons = synthetic_series(start, 24 * 10, 31);
    const HourlySeries temp = synthetic_series(start, 24 * 10, 32, 15.0, 1.0);

    SUBCASE("too few training rows") {
        const FeatureBuildResult r =
            build_features(cons, temp, {{start + 50, 1}}, 8, 100000, 1);
        CHECK(!r.features.has_value());
        CHECK(!r.skip_reason.empty());
    }
    SUBCASE("too few event rows") {
        const FeatureBuildResult r = build_features(cons, temp, {}, 8, 10, 1);
        CHECK(!r.features.has_value());
        CHECK(!r.skip_reason.empty());
        CHECK(r.dr_rows == 0);
    }
}

TEST_CASE("difference and contiguous runs") {
    const HourlySeries s = testutil::make_series(5, {1.0, 4.0, 9.0});
    const HourlySeries d = difference(s);
    REQUIRE(d.size() == 2);
    CHECK(d.hour(0) == 6);
    CHECK(d.value(0) == 3.0);
    CHECK(d.value(1) == 5.0);

    const HourlySeries gappy =
        HourlySeries::from_sorted({0, 1, 2, 10, 11, 12, 13, 20}, {1, 2, 3, 4, 5, 6, 7, 8});
    const HourlySeries run = longest_contiguous_run(gappy);
    REQUIRE(run.size() == 4);
    CHECK(run.hour(0) == 10);
    CHECK(run.value(3) == 7.0);
}

TEST_CASE("adf distinguishes unit roots from stationary series") {
    const std::size_t n = 2000;
    std::mt19937_64 rng(99);

    std::vector<double> noise(n), walk(n), trendy(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = util::normal01(rng);
        noise[i] = e;
        acc += e;
        walk[i] = acc;
        trendy[i] = 0.01 * static_cast<double>(i) + noise[i];
    }

    const ADFResult white = adf_test(testutil::make_series(0, noise));
    CHECK(white.stationary_at_99);
    CHECK(white.test_statistic < white.critical_values.at("1%"));

    const ADFResult unit = adf_test(testutil::make_series(0, walk));
    CHECK(!unit.stationary_at_99);
    CHECK(unit.test_statistic > unit.critical_values.at("1%"));

    // Trend stationarity is what the constant+trend regression detects.
    const ADFResult trend = adf_test(testutil::make_series(0, trendy));
    CHECK(trend.stationary_at_99);

    CHECK(white.critical_values.at("1%") < white.critical_values.at("5%"));
    CHECK(white.critical_values.at("5%") < white.critical_values.at("10%"));
    CHECK(white.used_lags >= 0);

    SUBCASE("gaps are rejected") {
        const HourlySeries gappy = HourlySeries::from_sorted({0, 2, 3}, {1, 2, 3});
        CHECK_THROWS(adf_test(gappy));
    }
    SUBCASE("explicit lag cap is respected") {
        const ADFResult capped = adf_test(testutil::make_series(0, noise), 3);
        CHECK(capped.used_lags <= 3);
    }
}

TEST_CASE("featureset checkpoints round trip") {
    const auto dir = testutil::test_dir("prep_checkpoint");
    const HourIndex start = days_from_civil(2016, 1, 4) * 24;
    const HourlySeries cons = synthetic_series(start, 24 * 30, 41);
    const HourlySeries temp = synthetic_series(start, 24 * 30, 42, 15.0, 1.0);
    const std::vector<DREvent> events{{start + 10 * 24 + 14, 2}};
    const FeatureBuildResult r = build_features(cons, temp, events, 8, 10, 1);
    REQUIRE(r.features.has_value());

    const StandardizationParams cp{1.25, 0.75};
    const StandardizationParams tp{15.5, 7.25};
    const auto path = dir / "fs.json";
    save_featureset(path, "house_9", *r.features, cp, tp);
    const LoadedFeatureSet back = load_featureset(path);

    CHECK(back.user_id == "house_9");
    CHECK(back.cons_params.mean == 1.25);
    CHECK(back.cons_params.std == 0.75);
    CHECK(back.temp_params.mean == 15.5);
    CHECK(back.features.X0 == r.features->X0);
    CHECK(back.features.Y0 == r.features->Y0);
    CHECK(back.features.X1 == r.features->X1);
    CHECK(back.features.Y1 == r.features->Y1);
    CHECK(back.features.hours0 == r.features->hours0);
    CHECK(back.features.hours1 == r.features->hours1);
    CHECK(back.features.column_schema == r.features->column_schema);
}
